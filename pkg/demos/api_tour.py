"""Library tour on the reference configuration: cover, periods, Voros table and puncture spectra."""

import numpy as np

from wkbcover.acceptance import reference_spec
from wkbcover.cover import build_cover, homology_basis
from wkbcover.ode import lambda_exponent, puncture_spectrum
from wkbcover.periods import period_chart
from wkbcover.wkb import riccati_recursion, voros_table


def main() -> None:
    spec = reference_spec()
    cover = build_cover(spec)
    cycles = homology_basis(cover)
    print("turning points:", np.round(cover.turning_points, 6))
    print("cycles:", [c.label for c in cycles])

    chart = period_chart(cover, cycles)
    print("period chart (A, B):", np.round(chart.vector, 8))

    series = riccati_recursion(spec, 2, exact=False)
    table = voros_table(cover, series, cycles)
    print("Voros periods, orders", table.orders)
    for label, vals in table.values.items():
        print(f"  {label:>8}:", " ".join(f"{complex(v):.6g}" for v in vals))

    for j in range(spec.n):
        sp = puncture_spectrum(spec, 0.1, j)
        lam = lambda_exponent(complex(spec.to_float().r[j]), 0.1)
        print(f"puncture {j + 1}: lambda = {lam:.6f}, eigenvalue relative error {sp.relative_error:.1e}")


if __name__ == "__main__":
    main()
