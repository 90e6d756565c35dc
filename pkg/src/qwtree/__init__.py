"""Coined quantum walks on the rooted binary tree with circulant coins.

Modules:

* ``tree_index``  vertex encoding and the level-major state layout
* ``coins``       circulant coins and their parametrizations
* ``walk``        the matrix-free walk operator
* ``moments``     return amplitudes and the power series of ``g``
* ``implicit``    the quintic equation satisfied by ``g`` and its branch
* ``spectral``    density, atoms and permutation-coin spectra
* ``verify``      the verification suite
* ``cli``         the ``qwtree`` command
"""

__version__ = "0.1.0"
