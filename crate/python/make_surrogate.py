"""Generate the synthetic 2x2 surrogate plant used for the MIMO benchmark.

The plant is drawn from a fixed seed and accepted only if it is stable and
the 4-state MIMO controller closes a stable, reasonably damped loop around
it (controller acts on the tracking error r - y). Run from the repository
root:

    python3 python/make_surrogate.py > crates/core/data/surrogate_2x2.json
"""
import json

import numpy as np

AC = np.diag([0.0, 1.0, 0.0, 1.0])
BC = np.array([[0, 0.3260], [0, 0.0802], [0.6250, 0], [0.2990, 0]])
CC = np.array([[1.0, 1.0, 0, 0], [0, 0, 1.0, 1.0]])
DC = np.zeros((2, 2))


def closed_loop(a, b, c, d):
    n, nc = a.shape[0], AC.shape[0]
    m = np.linalg.inv(np.eye(2) + DC @ d)
    # u = m (Cc xc - Dc C x) with r = e = 0
    ku_x, ku_c = -m @ DC @ c, m @ CC
    y_x, y_c = c + d @ ku_x, d @ ku_c
    top = np.hstack([a + b @ ku_x, b @ ku_c])
    bot = np.hstack([-BC @ y_x, AC - BC @ y_c])
    return np.vstack([top, bot])


def main():
    rng = np.random.default_rng(20240728)
    for _ in range(100000):
        poles = rng.uniform(0.6, 0.93, 4)
        q, _ = np.linalg.qr(rng.normal(size=(4, 4)))
        a = q @ np.diag(poles) @ q.T
        b = rng.normal(scale=0.3, size=(4, 2))
        c = rng.normal(scale=0.6, size=(2, 4))
        d = np.zeros((2, 2))
        dc = c @ np.linalg.solve(np.eye(4) - a, b)
        # controller pairs u1 with y2 and u2 with y1
        if dc[1, 0] < 0.5 or dc[0, 1] < 0.5 or abs(np.linalg.det(dc)) < 0.2:
            continue
        rho = max(abs(np.linalg.eigvals(closed_loop(a, b, c, d))))
        if rho < 0.95:
            break
    else:
        raise SystemExit("no surrogate found")
    mat = lambda x: {"rows": x.shape[0], "cols": x.shape[1], "data": x.round(6).tolist()}
    print(json.dumps({"a": mat(a), "b": mat(b), "c": mat(c), "d": mat(d)}, indent=2))


if __name__ == "__main__":
    main()
