"""Smoke test for the Python bindings.

Build and place the extension next to this script first:

    cargo build -p susyspec-py --release
    cp target/release/libsusyspec.so python/susyspec.so
"""

import math
import os
import sys

sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

import susyspec as ss


def close(a, b, tol):
    assert abs(a - b) <= tol, (a, b)


def main():
    free = ss.Profile.free(1)
    sign = ss.Profile.sign(1.0)

    close(ss.halfline_m_dirac(free, 1j)[0][0], 1j, 1e-12)
    close(ss.halfline_m_dirac(free, 1j, side="-")[0][0], -1j, 1e-12)
    close(ss.mhat(free, -1.0)[0][0], -1.0, 1e-12)
    close(ss.green_schrodinger(free, -1.0, 0.0, 1.0)[0][0], math.exp(-1) / 2, 1e-12)
    close(ss.green_schrodinger(free, -1.0, 0.5, 1.0, side="+")[0][0], math.sinh(0.5) * math.exp(-1), 1e-12)
    close(ss.mhat(sign, -1.0)[0][0], 1 - math.sqrt(2), 1e-12)

    full = ss.mhat_full(ss.Profile.noncommuting(), 0.4 + 0.9j, j=2)
    assert len(full) == 4 and all(len(r) == 4 for r in full)

    rho, resid = ss.spectral_density(free, "Mhat+1", [1.0, 4.0])
    close(rho[1][0][0].real, 2 / math.pi, 1e-5)
    assert len(resid) == 2

    mass, spread, detected = ss.point_mass(sign, "Mhat1", 0.0)
    assert detected and abs(mass[0][0] - 1) < 1e-3
    assert not ss.point_mass(sign, "Mhat2", 0.0)[2]
    assert ss.kernel_dims(sign) == (1, 0)

    rows = ss.identity_suite(ss.Profile.noncommuting())
    assert all(r[4] for r in rows), rows

    a, _ = ss.bm_decay(sign, ss.Profile.truncated_sign(1.0, 1.0), math.pi / 2)
    assert 0.9 <= a <= 1.1, a

    norm_sq, total, rel = ss.parseval_indicator(free, 1, 0.0, 1.0, [1.0])
    assert rel <= 0.02, rel

    p = ss.Profile.from_config("[problem] m=1 x0=0\n[tails] left=-1 right=1\n"
                               "[segment] from=-1 to=0 data=-1\n[segment] from=0 to=1 data=1\n")
    close(ss.mhat(p, -1.0)[0][0], 1 - math.sqrt(2), 1e-12)

    try:
        ss.mhat(free, 4.0)
    except ss.NumericalError:
        pass
    else:
        raise AssertionError("expected NumericalError")
    try:
        ss.Profile.from_config("[segment] from=1 to=0 data=1\n")
    except ValueError:
        pass
    else:
        raise AssertionError("expected ValueError")

    num = ss.Numerics(tol_ode=1e-12)
    close(ss.mhat(sign, -1.0 + 0.5j, numerics=num)[0][0],
          ss.mhat(sign, -1.0 + 0.5j)[0][0], 1e-10)
    print("python smoke test passed")


if __name__ == "__main__":
    main()
