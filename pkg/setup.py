#!/usr/bin/python

import pathlib
from setuptools import setup

HERE = pathlib.Path(__file__).parent
README = (HERE / "readme.md").read_text()

setup(
    name="draftiv",
    author="The draftiv developers",
    version="0.1.0",
    description="Panel instrumental-variables estimation of drafting effects in swimming races",
    long_description=README,
    long_description_content_type="text/markdown",
    license="Apache2",
    classifiers=[
        "License :: OSI Approved :: Apache Software License",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Programming Language :: Python :: 3.10",
        "Topic :: Scientific/Engineering :: Mathematics",
        "Development Status :: 3 - Alpha",
    ],
    packages=[
        "draftiv",
        "draftiv.panel",
        "draftiv.hdfe",
        "draftiv.scripts",
    ],
    python_requires='>=3.8',
    install_requires=["typing_extensions>=3.7.4",
                      "numpy>=1.17",
                      "pandas>=1.5",
                      "scipy>=1.7",
                      "tqdm>=4.56.0"],
    include_package_data=True,
)
