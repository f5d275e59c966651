# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled orbit kernel.

Mirror of _pure.py; keep the arithmetic operation-for-operation
identical (same Horner order, same guards) so the two backends produce
bitwise-equal orbits.  Built with -ffp-contract=off for that reason.
"""

from libc.math cimport isfinite

EXIT_MAX_STEPS = 0
EXIT_CONVERGED = 1
EXIT_LEFT_BALL = 2
EXIT_NONFINITE = 3


def eval_map(double complex[:, ::1] cx, double complex[:, ::1] cy,
             double complex x, double complex y):
    """One step of the dense-coefficient polynomial map."""
    cdef Py_ssize_t dx = cx.shape[0] - 1
    cdef Py_ssize_t dy = cx.shape[1] - 1
    cdef double complex tx = 0
    cdef double complex ty = 0
    cdef double complex rowx, rowy
    cdef Py_ssize_t i, j
    for i in range(dx, -1, -1):
        rowx = 0
        rowy = 0
        for j in range(dy, -1, -1):
            rowx = rowx * y + cx[i, j]
            rowy = rowy * y + cy[i, j]
        tx = tx * x + rowx
        ty = ty * x + rowy
    return tx, ty


def run_orbit(double complex[:, ::1] cx, double complex[:, ::1] cy,
              double complex x0, double complex y0,
              Py_ssize_t max_steps, double radius2, double conv_tol2,
              double complex[::1] xs, double complex[::1] ys):
    """Iterate the map, storing the orbit into xs, ys.

    Returns (n, exit_code); see the pure backend for the code table.
    """
    cdef double complex x = x0
    cdef double complex y = y0
    cdef double complex tx, ty, rowx, rowy
    cdef double n2
    cdef Py_ssize_t dx = cx.shape[0] - 1
    cdef Py_ssize_t dy = cx.shape[1] - 1
    cdef Py_ssize_t step, i, j
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
    for step in range(1, max_steps + 1):
        tx = 0
        ty = 0
        for i in range(dx, -1, -1):
            rowx = 0
            rowy = 0
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
