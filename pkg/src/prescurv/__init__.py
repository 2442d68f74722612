"""Prescribed Gaussian and geodesic curvature problems on flat model surfaces.

Solves -Delta u + 2*Kbg = 2*K(x)*e^u with the nonlinear Neumann condition
du/dn + 2*hbg = 2*h(x)*e^(u/2) on triangulated cylinders, annuli and
truncated half-disks, by energy minimization and a numerical mountain-pass
search, and cross-checks the results against a library of closed-form
solutions (Morse indices, mass quantization, blow-up localization).
"""

__version__ = "0.1.0"
