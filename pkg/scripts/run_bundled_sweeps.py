"""Run every bundled configuration and write its artifacts under one directory.

usage: python scripts/run_bundled_sweeps.py [OUT_DIR] [--cold]
"""
import sys
import time
from pathlib import Path

from penalized_nls.config import bundled_configs, load_config
from penalized_nls.sweep import run_sweep


def main(argv):
    args = [a for a in argv if not a.startswith("--")]
    out = Path(args[0]) if args else Path("results")
    seed_mode = "cold" if "--cold" in argv else None
    status = 0
    for name in bundled_configs():
        t0 = time.perf_counter()
        report = run_sweep(load_config(name), seed_mode=seed_mode, out=out / name)
        dt = time.perf_counter() - t0
        print(f"{name:28s} {'pass' if report.passed else 'FAIL'}  {dt:6.1f} s")
        for key, c in report.checks.items():
            if c["acceptance"] or not c["pass"]:
                print(f"    {key:22s} {'ok ' if c['pass'] else 'no '} {c['detail']}")
        status |= not report.passed
    return status


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
