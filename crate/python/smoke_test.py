"""Builds the extension module with cargo and exercises the bindings.

Usage: python3 python/smoke_test.py [--no-build]
"""

import json
import os
import shutil
import subprocess
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def build():
    subprocess.run(
        ["cargo", "build", "--release", "-p", "anticomm-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )


def load():
    lib = os.path.join(ROOT, "target", "release", "libanticomm_py.so")
    if not os.path.exists(lib):
        sys.exit(f"missing {lib}; run without --no-build")
    tmp = tempfile.mkdtemp()
    shutil.copy(lib, os.path.join(tmp, "anticomm_py.so"))
    sys.path.insert(0, tmp)
    import anticomm_py

    return anticomm_py


def check(name, ok, detail=""):
    print(f"{'ok  ' if ok else 'FAIL'} {name} {detail}")
    return ok


def main():
    if "--no-build" not in sys.argv:
        build()
    ac = load()
    results = []

    omega, zeta, rho_aux = ac.law_constants()
    results.append(check("constants", abs(zeta - 3.330190676) < 1e-9 and abs(omega - 0.4858682712) < 1e-9))

    z = complex(0.3, 0.2)
    m, h, res = ac.m_ac(z)
    cubic = z * m**3 - m**2 - z * m - 1
    results.append(check("m_ac cubic", abs(cubic) < 1e-12 and m.imag > 0, f"|cubic|={abs(cubic):.2e}"))

    try:
        ac.m_ac(complex(0.0, -1.0))
        results.append(check("lower half plane refused", False))
    except ValueError:
        results.append(check("lower half plane refused", True))

    pair = ac.WignerPair(16, "gaussian", 3)
    u = pair.u()
    herm = all(abs(u[i][j] - u[j][i].conjugate()) == 0 for i in range(16) for j in range(16))
    results.append(check("U hermitian", herm))
    again = ac.WignerPair.from_text(pair.to_text())
    results.append(check("dump round trip", again.u() == pair.u() and again.v() == pair.v()))

    lin = pair.linearize()
    fr = lin.factorization_residual(complex(0.0, 1.0))
    results.append(check("factorization", fr < 1e-12, f"{fr:.2e}"))
    basic = lin.basic_identities(complex(0.5, 0.5))
    results.append(check("basic identities", max(basic) < 1e-8, f"{max(basic):.2e}"))
    fast = lin.resolvent_stats(complex(0.2, 0.3), "schur")
    slow = lin.resolvent_stats(complex(0.2, 0.3), "minor")
    gap = max(abs(a - b) for a, b in zip(fast["r_i_frob"], slow["r_i_frob"]))
    results.append(check("schur vs minor", gap < 1e-8 and slow["key_identity"] < 1e-8, f"{gap:.2e}"))

    s = ac.solve_sigma(zeta, 2e-4)
    results.append(check("sigma at edge", abs(s - 2e-4 ** (1 / 3)) < 1e-9, f"{s:.10f}"))

    grid = [complex(x / 2, y) for x in range(-4, 5) for y in (0.1, 0.5, 1.0)]
    rep = ac.WignerPair(32, "gaussian", 1).verify(grid)
    results.append(check("verify", rep["implication_holds"] and rep["k"] >= 2, f"K={rep['k']:.3f}"))

    with tempfile.TemporaryDirectory() as d:
        out = os.path.join(d, "fig1.csv")
        code = ac.run_cli(["figure1", "--rho", "0.2", "--out", out])
        with open(out) as f:
            lines = f.read().splitlines()
        results.append(check("cli figure1", code == 0 and len(lines) == 1 + 1603))

    print(json.dumps({"passed": sum(results), "total": len(results)}))
    sys.exit(0 if all(results) else 1)


if __name__ == "__main__":
    main()
