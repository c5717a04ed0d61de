from setuptools import setup

from icdcoder import get_version

setup(
    name='icdcoder',
    version=get_version(),
    description="Assign three-character ICD-10 codes to short clinical "
                "problem-list entries.",
    long_description=open('README.rst').read(),
    license='MIT',
    packages=[
        'icdcoder',
        'icdcoder.explain',
        'icdcoder.explain.templatetags',
        'icdcoder.helpers',
        'icdcoder.models',
        'icdcoder.numerics',
        'icdcoder.tests',
        'icdcoder.tests.setup',
    ],
    package_data={
        'icdcoder.explain': ['templates/icdcoder/*.html'],
        'icdcoder.tests.setup': ['*.tsv', '*.json'],
    },
    python_requires='>=3.8',
    install_requires=[
        'Django',
        'numpy',
        'scikit-learn',
    ],
    entry_points={
        'console_scripts': ['icdcoder = icdcoder.cli:main'],
    },
    classifiers=[
        'Development Status :: 4 - Beta',
        'Environment :: Console',
        'Intended Audience :: Healthcare Industry',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Operating System :: OS Independent',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering :: Medical Science Apps.',
    ],
)
