"""f_min, supersensitivity width and Schmidt number against gain, both configurations."""
import argparse
import csv
import sys

from su11sim.calib import CalibrationTable, calibrate, gamma_for_G
from su11sim.dispersion import CrystalGeometry, OpticalModel
from su11sim.gsolver import SolverSettings, compensated_second_from_first, composition_parts, solve_crystal
from su11sim.metrology import compensated_closed_form, sweep_report, total_photons
from su11sim.qgrid import Grid


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--gains", type=float, nargs="+", default=[0.01, 0.5, 1, 1.25, 2, 3, 3.75, 4, 5])
    ap.add_argument("--fwhm", type=float, default=50e-6)
    ap.add_argument("--length", type=float, default=2e-3)
    ap.add_argument("--q-max", type=float, default=4.5e5)
    ap.add_argument("--n", type=int, default=401)
    ap.add_argument("--steps", type=int, default=256)
    ap.add_argument("--calibration", help="JSON table from calibration_table.py (computed if omitted)")
    ap.add_argument("--noncompensated", action="store_true", help="also sweep the non-compensated setup")
    ap.add_argument("--out", default="-")
    args = ap.parse_args()

    m = OpticalModel.sellmeier_bbo()
    grid = Grid(args.q_max, args.n)
    geom = CrystalGeometry.from_fwhm(args.fwhm, args.length, "compensated")
    settings = SolverSettings(args.steps)
    if args.calibration:
        table = CalibrationTable.load(args.calibration)
    else:
        table = calibrate(geom.with_configuration("single"), m, grid, steps=args.steps)

    rows = []
    for G in args.gains:
        gam = gamma_for_G(table, G)
        tp1 = solve_crystal(geom, m, gam, grid, settings)
        n1 = total_photons(tp1)
        rep = sweep_report(composition_parts(tp1, compensated_second_from_first(tp1)), n1)
        row = {"G": G, "N1": n1, "f_min": rep.f_min, "f_H": rep.f_H, "ratio": rep.f_min / rep.f_H,
               "Delta": rep.Delta, "K": compensated_closed_form(tp1).K}
        if args.noncompensated:
            nc = geom.with_configuration("noncompensated")
            tp2 = solve_crystal(nc, m, gam, grid, settings, crystal_index=2)
            row["f_min_nc"] = sweep_report(composition_parts(tp1, tp2), n1).f_min
        rows.append(row)
        print(" ".join(f"{k}={v:.6g}" for k, v in row.items()), file=sys.stderr)

    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    w = csv.DictWriter(fh, fieldnames=list(rows[0]))
    w.writeheader()
    for r in rows:
        w.writerow({k: repr(float(v)) for k, v in r.items()})
    if fh is not sys.stdout:
        fh.close()


if __name__ == "__main__":
    main()
