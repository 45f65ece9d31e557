#!/usr/bin/env python3
"""
Re-check the energy inequalities of an existing trace CSV without re-running the flow
"""

import sys
from pathlib import Path

# Add src to Python path
sys.path.insert(0, str(Path(__file__).parent))

from src.models.trace import SPHERE_COLUMNS, FlowTrace


def verify_trace(trace_path: str, proximity: float = 2.0, slack: float = 1e-10) -> bool:
    """Running energy inequality, sup bound and monotone dirichlet for one trace."""

    print("Trace Verification")
    print("=" * 40)

    try:
        trace = FlowTrace.from_csv(trace_path)
    except (OSError, ValueError) as e:
        print(f"❌ Error loading trace: {e}")
        return False

    sphere = tuple(trace.columns) == SPHERE_COLUMNS
    dirichlet = trace.dirichlet()
    print(f"✅ Loaded {len(trace)} rows ({'sphere' if sphere else 'matrix'} flow)")
    print(f"   Initial dirichlet: {dirichlet[0]:.6e}")
    print(f"   Final dirichlet:   {dirichlet[-1]:.6e}")
    print(f"   Kinetic sum:       {float(trace.kinetic().sum()):.6e}")

    verdicts = trace.energy_verdicts(scale=proximity if sphere else 1.0, slack=slack)
    verdicts.append(trace.monotone_verdict(slack=slack))

    print("\nInvariants:")
    print("-" * 20)
    for v in verdicts:
        print(f"{'✅' if v.passed else '❌'} {v.name}: {v.value:.3e} (bound {v.bound:.1e})")

    passed = all(v.passed for v in verdicts)
    print()
    print("🎉 Trace verification passed" if passed else "⚠️  Trace verification failed")
    return passed


def main(argv=None) -> int:
    args = sys.argv[1:] if argv is None else list(argv)
    if not args:
        print("Usage: python verify_trace.py <trace.csv> [proximity]")
        return 2
    proximity = float(args[1]) if len(args) > 1 else 2.0
    return 0 if verify_trace(args[0], proximity) else 1


if __name__ == "__main__":
    sys.exit(main())
