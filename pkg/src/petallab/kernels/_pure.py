"""Pure-Python orbit kernel.

Mirror of the compiled kernel in _core.pyx.  The two must stay
operation-for-operation identical (same Horner order, same guard
expressions) so orbits agree bitwise across backends.
"""

from math import isfinite

EXIT_MAX_STEPS = 0
EXIT_CONVERGED = 1
EXIT_LEFT_BALL = 2
EXIT_NONFINITE = 3


def eval_map(cx, cy, x, y):
    """One step of the dense-coefficient polynomial map."""
    dx = cx.shape[0] - 1
    dy = cx.shape[1] - 1
    tx = 0j
    ty = 0j
    for i in range(dx, -1, -1):
        rowx = 0j
        rowy = 0j
        for j in range(dy, -1, -1):
            rowx = rowx * y + cx[i, j]
            rowy = rowy * y + cy[i, j]
        tx = tx * x + rowx
        ty = ty * x + rowy
    return tx, ty


def run_orbit(cx, cy, x0, y0, max_steps, radius2, conv_tol2, xs, ys):
    """Iterate the map, storing the orbit into xs, ys.

    Returns (n, exit_code): points 0..n are stored.  Codes: 0 hit
    max_steps, 1 converged (norm^2 < conv_tol2), 2 left the guard ball
    (norm^2 > radius2), 3 non-finite coordinates.
    """
    x = complex(x0)
    y = complex(y0)
    xs[0] = x
    ys[0] = y
    if not (isfinite(x.real) and isfinite(x.imag)
            and isfinite(y.real) and isfinite(y.imag)):
        return 0, EXIT_NONFINITE
    n2 = x.real * x.real + x.imag * x.imag + y.real * y.real + y.imag * y.imag
    if n2 > radius2:
        return 0, EXIT_LEFT_BALL
    if n2 < conv_tol2:
        return 0, EXIT_CONVERGED
    dx = cx.shape[0] - 1
    dy = cx.shape[1] - 1
    for step in range(1, max_steps + 1):
        tx = 0j
        ty = 0j
        for i in range(dx, -1, -1):
            rowx = 0j
            rowy = 0j
            for j in range(dy, -1, -1):
                rowx = rowx * y + cx[i, j]
                rowy = rowy * y + cy[i, j]
            tx = tx * x + rowx
            ty = ty * x + rowy
        x = tx
        y = ty
        xs[step] = x
        ys[step] = y
        if not (isfinite(x.real) and isfinite(x.imag)
                and isfinite(y.real) and isfinite(y.imag)):
            return step, EXIT_NONFINITE
        n2 = x.real * x.real + x.imag * x.imag + y.real * y.real + y.imag * y.imag
        if n2 > radius2:
            return step, EXIT_LEFT_BALL
        if n2 < conv_tol2:
            return step, EXIT_CONVERGED
    return max_steps, EXIT_MAX_STEPS
