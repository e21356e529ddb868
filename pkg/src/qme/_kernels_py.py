"""Pure-numpy implementations of the hot kernels.

These mirror ``_kernels.pyx`` operation for operation and are used whenever
the compiled extension is unavailable (or ``QME_PURE_PYTHON=1``).
"""

import numpy as np

# Padé [13/13] numerator coefficients and the matching scaling threshold.
PADE13 = (
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
)
THETA13 = 5.371920351148152


def _scaling(norm1):
    if norm1 <= THETA13:
        return 0
    return max(0, int(np.ceil(np.log2(norm1 / THETA13))))


def expm(A):
    """Matrix exponential by scaling and squaring with a fixed Padé-13 approximant."""
    A = np.array(A, dtype=np.complex128, copy=True)
    n = A.shape[0]
    if A.ndim != 2 or A.shape[1] != n:
        raise ValueError("expm expects a square matrix")
    if n == 0 or not A.any():
        return np.eye(n, dtype=np.complex128)
    s = _scaling(np.abs(A).sum(axis=0).max())
    if s:
        A /= 2.0**s
    b = PADE13
    ident = np.eye(n, dtype=np.complex128)
    A2 = A @ A
    A4 = A2 @ A2
    A6 = A4 @ A2
    U = A @ (A6 @ (b[13] * A6 + b[11] * A4 + b[9] * A2)
             + b[7] * A6 + b[5] * A4 + b[3] * A2 + b[1] * ident)
    V = (A6 @ (b[12] * A6 + b[10] * A4 + b[8] * A2)
         + b[6] * A6 + b[4] * A4 + b[2] * A2 + b[0] * ident)
    X = np.linalg.solve(V - U, V + U)
    for _ in range(s):
        X = X @ X
    return X


def magnus_trial(La, Lm, Lb, h):
    """One step-doubling trial of the exponential-midpoint rule.

    ``Lm`` is the generator at the step midpoint, ``La``/``Lb`` at the
    midpoints of the two half steps. Returns the Richardson-extrapolated
    two-half-step propagator and the scaled entrywise difference between the
    single full step and the two half steps.
    """
    E1 = expm(h * np.asarray(Lm))
    E2 = expm(0.5 * h * np.asarray(Lb)) @ expm(0.5 * h * np.asarray(La))
    scale = max(1.0, float(np.abs(E2).max()))
    err = float(np.abs(E1 - E2).max()) / scale
    # the symmetric rule has an odd error expansion, so this removes the h^3 term
    return E2 + (E2 - E1) / 3.0, err
