"""mzak: pseudospectral simulation and estimate verification on periodic tori.

Subpackages by concern:

* grids      -- torus grids, transforms, Fourier multipliers, snapshots
* dynamics   -- nonlinearities, propagators, time integrators, checkpoints
* invariants -- conserved quantities and the energy-trap bound
* spacetime  -- space-time fields, dispersive norms, time windows
* estimates  -- algebraic identities, trilinear sums, bilinear ratio harness
* config/cli -- run configuration and the command-line front end
"""

__version__ = "0.1.0"
