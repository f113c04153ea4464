"""
Fourier peaks against realization matching
==========================================

One decohered trace (T2 = 0.5 s) of each molecule goes through both
pipelines: the long trace through the spectral baseline and its first 1600
samples through realization matching. The table is what ``qhid report``
prints.
"""

import numpy as np

from qhid.cli import report_table
from qhid.hamiltonian import MoleculeSpec
from qhid.pipeline import default_dt, identify, identify_ft, simulate_protocol, true_values

molecules = {
    "tce": (
        MoleculeSpec.from_values(2, (1179.4, 1082.5, 162.6), "strong", observed_qubits=(2,), initial_states=("IX",)),
        1 << 14,
    ),
    "ala": (
        MoleculeSpec.from_values(
            3, (25721.2, 13881.5, 24749.9, 84.3, 1.9, 55.7), "weak",
            observed_qubits=(1, 2, 3), initial_states=("XII", "IXI", "IIX"),
        ),
        1 << 18,
    ),
}

for name, (spec, long_points) in molecules.items():
    truth = true_values(spec)
    _, trace = simulate_protocol(spec, default_dt(spec), long_points, t2=0.5)
    ft = identify_ft(trace, spec, reference=truth, truth=truth)
    zs = identify(trace.head(1600), spec, reference=truth, truth=truth)
    print(f"\n{name}: FT resolution {ft.details['fit']['resolution_hz']:.3f} Hz, "
          f"realization order {zs.details['order']}, T2 estimate {zs.details['match']['t2_estimate']:.4f} s")
    print(report_table(zs.report(), ft.report()))
    # a5 (the 1.9 Hz coupling) sits under the 0.64 Hz-wide lines of both methods
    print("statuses FT:", ft.status)
    print("statuses ZS:", zs.status)
