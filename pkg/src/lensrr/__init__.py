"""Sharp constants for the monotonic rearrangement operator.

The package computes the exact operator norm of the non-increasing
rearrangement from dyadic-type function classes on [0,1]^n (quadratic BMO,
Muckenhoupt A2 and general A_{p1,p2}) to their continuous counterparts on
[0,1], through a calculus of planar lens domains and their minimal
alpha-extensions.  Extremal witness functions attain the constants, a
martingale refinement certifies the underlying filtration mechanics, and a
randomized sampler stress-tests the bounds.
"""

from .geometry import (
    BOUNDARY_RTOL,
    EnvelopeError,
    EnvelopeGrid,
    ExtensionResult,
    ParabolicLens,
    PowerEpigraph,
    PowerLens,
    RootBracketingError,
    affine_orbit_parabolic,
    affine_orbit_power,
    beta_monotone_extension,
    envelope_peak,
    envelope_polyline,
    epigraph_threshold,
    free_boundary_ratio_roots,
    higher_segments,
    is_alpha_extension,
    is_higher_segment,
    min_extension_a2,
    min_extension_parabolic,
    min_extension_power,
    segment_in_lens,
    segment_in_lens_exact,
    write_envelope_csv,
)

__all__ = [
    "BOUNDARY_RTOL",
    "EnvelopeError",
    "EnvelopeGrid",
    "ExtensionResult",
    "ParabolicLens",
    "PowerEpigraph",
    "PowerLens",
    "RootBracketingError",
    "affine_orbit_parabolic",
    "affine_orbit_power",
    "beta_monotone_extension",
    "envelope_peak",
    "envelope_polyline",
    "epigraph_threshold",
    "free_boundary_ratio_roots",
    "higher_segments",
    "is_alpha_extension",
    "is_higher_segment",
    "min_extension_a2",
    "min_extension_parabolic",
    "min_extension_power",
    "segment_in_lens",
    "segment_in_lens_exact",
    "write_envelope_csv",
]
