import os

from setuptools import setup

here = os.path.dirname(os.path.abspath(__file__))

version = {}
with open(os.path.join(here, 'clutter_grasp', '_version.py')) as f:
    exec(f.read(), version)

install_requires = ['numpy>=1.17',
                    'scipy>=1.4',
                    'pyyaml',
                    'matplotlib>=3.1',
                    'openai>=1.0']

setup(name='clutter-grasp',
      version=version['__version__'],
      keywords='robotics grasping clutter planning benchmark',
      classifiers=["Development Status :: 3 - Alpha",
                   "License :: OSI Approved :: BSD License",
                   "Programming Language :: Python :: 3",
                   "Programming Language :: Python :: 3.8",
                   "Programming Language :: Python :: 3.9",
                   "Programming Language :: Python :: 3.10",
                   "Programming Language :: Python :: 3.11",
                   "Topic :: Scientific/Engineering :: Artificial Intelligence",
                   "Topic :: Scientific/Engineering :: Physics"],
      license='BSD',
      description=('Closed-loop grasping of target objects in clutter with '
                   'a planner over a library of manipulation skills'),
      long_description=open(os.path.join(here, 'README.rst')).read(),
      packages=['clutter_grasp', 'clutter_grasp.tests'],
      package_data={'clutter_grasp': ['data/*.yaml']},
      python_requires='>=3.8',
      install_requires=install_requires,
      extras_require={'test': ['pytest'],
                      'docs': ['sphinx', 'numpydoc', 'sphinxcontrib-autoprogram',
                               'alabaster']},
      entry_points='''
        [console_scripts]
        clutter-grasp=clutter_grasp.__main__:main
      ''',
      zip_safe=False)
