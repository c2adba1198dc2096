from setuptools import setup

setup(
    name="BesselHitting",
    version="0.1.0",
    description="First hitting times of Bessel processes: exact laws, asymptotics, samplers and a PDE oracle",
    long_description=open('README.rst').read(),
    license='LICENSE.txt',
    author="The BesselHitting developers",
    install_requires=[
        "PasteDeploy>=1.5.0",
        "SQLAlchemy>=1.4",
        "numpy>=1.17",
        "scipy>=1.5",
    ],
    tests_require=[
        'pytest>=6.0',
        'mock>=3.0.0',
    ],
    data_files=[
        ('examples', [
            'example.ini',
            'logging.conf',
        ]),
    ],
    zip_safe=False,
    scripts=['besselctl.py'],
    packages=['BesselHitting', 'BesselHitting.apps'],
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Environment :: Console',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: GNU Affero General Public License v3 or later (AGPLv3+)',
        'Operating System :: POSIX',
        'Programming Language :: Python',
        'Programming Language :: Python :: 3',
        'Topic :: Scientific/Engineering :: Mathematics',
    ],
    entry_points="""
    [paste.app_factory]
    runner = BesselHitting.apps.runner:make_runner
    """,
)
