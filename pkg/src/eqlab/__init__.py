"""Numerical laboratory for the earthquake metric on the Teichmueller space
of the once-punctured torus.

Subpackages:
    hyp2    -- upper half-plane primitives (Mobius maps, geodesics, angles, collars)
    torus   -- trace coordinates, slopes, twist flows, tangent vectors
    norms   -- earthquake / Thurston / Weil-Petersson norms and the indicatrix
    metrics -- distances, path optimization, pinching, non-geodesicity experiments
    asym    -- generic asymmetric-metric-space checks
    fdcomp  -- certified FD-sequences and the forward FD-completion machinery
    cli     -- experiment runner with CSV/JSON/SVG outputs
"""

__version__ = "0.1.0"
