"""Lattice Boltzmann method with variational-quantum-circuit collision models.

The package couples a classical D2Q9 BGK solver with a small statevector
emulator so that the nonlinear part of the collision operator can be learned
by a symmetry-constrained parameterized circuit and re-inserted into the
time-stepping loop.  Sub-modules:

- ``lattice``   classical D2Q9 solver, test-case flows, trajectory I/O
- ``dataset``   collision sample corpora (simulation-harvested or synthetic)
- ``qsim``      dense statevector/density-matrix emulator and channel encoding
- ``symmetry``  dihedral group actions on channels and qubits
- ``ansatz``    equivariant circuit construction and model artifacts
- ``training``  loss functions, gradients, Adam, training loops
- ``hybrid``    classical/quantum co-simulation and error metrics
- ``analysis``  collision-operator diagnostics, sweeps, diffusive scaling
- ``cli``       command-line front end (``qlbm`` entry point)
"""

__version__ = "0.1.0"
