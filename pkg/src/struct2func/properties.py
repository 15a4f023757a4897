"""Normalized per-residue property table (20 columns) used for the feature channels.

Values are stored verbatim, including editorial choices such as the 0.3/0.6/1
acid-base weights; they are not recomputed from raw chemistry.
"""

import numpy as np

TABLE_VERSION = 1

COLUMNS = (
    "hydrophobic_yes", "hydrophobic_no", "pka", "polar_yes", "polar_no",
    "acidic", "basic", "small_yes", "small_no", "aromatic", "aliphatic",
    "avg_mass", "pi", "pk1", "pk2",
    "essential_yes", "essential_no", "essential_conditional",
    "mono_mass_ms", "avg_mass_ms",
)

_ROWS = """\
A 1 0 0.191 0 1 0   0   1 0 0 1  0.436 0.399 0.833 0.581 0 1 0 0.382 0.382
C 1 0 0.156 0 1 1   0   1 0 0 0  0.593 0.278 0.182 1.000 0 0 1 0.554 0.554
D 0 1 0.162 1 0 1   0   1 0 0 0  0.652 0.000 0.288 0.596 0 1 0 0.618 0.618
E 0 1 0.171 1 0 1   0   0 1 0 0  0.720 0.038 0.455 0.379 0 0 1 0.693 0.693
F 1 0 0.179 0 1 0   0   0 1 1 0  0.809 0.334 0.606 0.298 1 0 0 0.790 0.790
G 1 0 0.191 0 1 0   0   1 0 0 0  0.368 0.406 0.833 0.535 0 0 1 0.306 0.306
H 0 1 0.146 1 0 0   0.3 0 1 1 0  0.760 0.601 0.000 0.308 1 0 0 0.737 0.736
I 1 0 0.189 0 1 0   0   0 1 0 1  0.642 0.405 0.788 0.525 1 0 0 0.608 0.608
K 0 1 0.176 1 0 0   0.6 0 1 0 0  0.716 0.853 0.545 0.172 1 0 0 0.688 0.688
L 1 0 0.189 0 1 0   0   0 1 0 1  0.642 0.399 0.803 0.515 1 0 0 0.608 0.608
M 1 0 0.173 0 1 0   0   0 1 0 1  0.731 0.365 0.500 0.283 1 0 0 0.704 0.705
N 0 1 0.174 1 0 0   0   1 0 0 0  0.647 0.324 0.515 0.000 0 1 0 0.613 0.613
P 1 0 0.159 0 1 0   0   1 0 0 0  0.564 0.436 0.227 0.970 0 1 0 0.522 0.522
Q 0 1 0.176 1 0 0   0   0 1 0 0  0.716 0.354 0.561 0.207 0 1 0 0.688 0.688
R 0 1 0.148 1 0 0   1   0 1 0 0  0.853 1.000 0.030 0.136 0 0 1 0.839 0.839
S 0 1 0.178 1 0 0   0   1 0 0 0  0.515 0.358 0.591 0.247 0 1 0 0.468 0.468
T 0 1 0.170 1 0 0   0   1 0 0 0  0.583 0.348 0.439 0.192 1 0 0 0.543 0.543
U 0 1 0.155 0 1 1   0   1 0 0 0  0.823 0.331 0.167 0.646 0 1 0 0.811 0.806
V 1 0 0.194 0 1 0   0   1 0 0 1  0.574 0.398 0.894 0.515 1 0 0 0.532 0.532
W 1 0 0.200 0 1 0   0   0 1 1 0  1.000 0.384 1.000 0.348 1 0 0 1.000 1.000
Y 0 1 0.179 1 0 0.3 0   0 1 1 0  0.887 0.353 0.606 0.247 0 0 1 0.876 0.876
"""


def _load():
    table = {}
    for line in _ROWS.splitlines():
        code, *vals = line.split()
        assert len(vals) == len(COLUMNS), code
        table[code] = np.array([float(v) for v in vals])
    return table


PROPERTY_TABLE: dict[str, np.ndarray] = _load()
