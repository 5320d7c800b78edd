"""Step-halving study of the memory-kernel solver against the lattice propagator."""
import argparse
import math

import numpy as np

from mpemba_wqed import ModelParams, build_hamiltonian, evolve
from mpemba_wqed.kernel import solve_atom_amplitude
from mpemba_wqed.propagate import required_half_width
from mpemba_wqed.states import canonical_state, dark_state


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--horizon", type=float, default=50.0)
    ap.add_argument("--g0", type=float, default=0.2)
    ap.add_argument("--L", type=int, default=20)
    ap.add_argument("--levels", type=int, default=4)
    args = ap.parse_args()

    coarse = 0.1
    M = max(required_half_width(1.0, args.horizon), 2 * args.L + 8)
    p = ModelParams(g0=args.g0, M=M)
    h = build_hamiltonian(p)
    for name, state in (("canonical", canonical_state(p)), ("dark", dark_state(p, args.L))):
        ref = evolve(state, h, args.horizon, sample_step=coarse).atom_amps
        prev = None
        print(f"{name}:")
        for level in range(args.levels):
            step = coarse / 2 ** level
            _, c = solve_atom_amplitude(p, state, args.horizon, step)
            err = float(np.max(np.abs(c[:: 2 ** level] - ref)))
            order = "" if prev is None else f"  order {math.log2(prev / err):.3f}"
            print(f"  h={step:<8g} max|c_V - c_L| = {err:.3e}{order}")
            prev = err


if __name__ == "__main__":
    main()
