# -*- coding: utf-8 -*-
#
# Copyright 2019 Pietro Barbiero and Giovanni Squillero
#
# Licensed under the Apache License, Version 2.0 (the "License"); you may not
# use this file except in compliance with the License.
# You may obtain a copy of the License at:
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
# WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#
# See the License for the specific language governing permissions and
# limitations under the License.

from setuptools import setup, find_packages
from os import path

this_directory = path.abspath(path.dirname(__file__))
with open(path.join(this_directory, 'README.rst'), encoding='utf-8') as f:
    long_description = f.read()
with open(path.join(this_directory, 'requirements.txt'), encoding='utf-8') as f:
    install_requires = [line.strip() for line in f if line.strip()]

setup(
    name='tunemerge',
    version='0.1.0',
    description='TuneMerge: alternating tuning and merging of task-specific models, '
                'with task-arithmetic baselines and executable checks of the underlying gradient identities.',
    long_description=long_description,
    long_description_content_type="text/x-rst",
    author='Pietro Barbiero and Giovanni Squillero',
    author_email='cleisthenes.megacleos@gmail.com',
    license="Apache 2.0",
    packages=find_packages(exclude=('tests', 'docs')),
    include_package_data=True,
    python_requires='>=3.8',
    install_requires=install_requires,
    entry_points={'console_scripts': ['tunemerge = tunemerge.cli:main']},
)
