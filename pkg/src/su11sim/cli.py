"""Command-line entry point: run single crystals, interferometers, φ- and G-sweeps
and calibrations from a JSON config, writing CSV tables and JSON summaries.

    su11sim --config run.json --command sweep-phase --out results/
"""
from __future__ import annotations

import argparse
import copy
import hashlib
import json
import os
import sys
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .calib import TABLE_GAINS, CalibrationTable, calibrate, gamma_for_G, window_centers
from .dispersion import CrystalGeometry, OpticalModel, external_angle
from .errors import ConfigError, DivergenceError, Su11Error
from .gsolver import (SolverSettings, TransferPair, compensated_second_from_first, composition_parts,
                      identity_residuals, load_pair, save_pair, solve_crystal)
from .metrology import (covariance, default_phases, intensity, limits, match_lx, phase_sweep,
                        sensitivity_from_sweep, total_photons)
from .planewave import compose_pw, schmidt_number_pw, second_crystal_pw, single_crystal_pw
from .qgrid import Grid, quadrature
from .schmidt import decompose, schmidt_number

COMMANDS = ("single-crystal", "su11", "sweep-phase", "sweep-gain", "calibrate")
CACHE_ENV = "SU11_CACHE_DIR"

DEFAULT_CONFIG = {
    "model": {"mode": "sellmeier-bbo", "lambda_pump": 354.6e-9},
    "geometry": {"length_L1": 2e-3, "configuration": "compensated", "pump_fwhm": 50e-6},
    "grid": {"q_max": 4.5e5, "n_points": 401},
    "pw_grid": {"q_max": 4e6, "n_points": 32001},
    "solver": {"steps": 256, "parity": True, "compensated_shortcut": True},
    "gain": {"G": 1.0},
    "phase": 0.0,
    "sweep": {"phi": {"num": 64}, "G": [1.25, 2.5, 3.75, 5.0]},
    "calibration": None,
    "degenerate": False,
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    model: OpticalModel
    geometry: CrystalGeometry
    grid: Grid
    pw_grid: Grid
    solver: SolverSettings
    compensated_shortcut: bool
    gain: dict
    phase: float
    phis: np.ndarray
    gains: list
    calibration: str | None
    degenerate: bool
    raw: dict = field(repr=False, default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        raw = _merge(DEFAULT_CONFIG, d)
        unknown = set(d) - set(DEFAULT_CONFIG)
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        try:
            model = OpticalModel.from_config(raw["model"])
            geom_d = dict(raw["geometry"])
            if geom_d.pop("plane_wave", False):
                geom_d["pump_fwhm"] = None
                geom_d["pump_sigma"] = None
            geometry = CrystalGeometry.from_config(geom_d)
            grid = Grid.from_dict(raw["grid"])
            pw_grid = Grid.from_dict(raw["pw_grid"])
            sv = raw["solver"]
            solver = SolverSettings(int(sv.get("steps", 256)), float(sv.get("tolerance", 1e-6)),
                                    bool(sv.get("parity", True)))
        except ConfigError as exc:
            raise ConfigError(f"{exc}") from None
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from None
        gain = dict(raw["gain"] or {})
        if not ({"G", "gamma"} & set(gain)):
            raise ConfigError("gain section needs 'G' or 'gamma'")
        phis = _phase_list(raw["sweep"].get("phi"))
        gains = [float(g) for g in raw["sweep"].get("G", [])]
        if not gains:
            raise ConfigError("sweep.G must be a nonempty list")
        phase = _parse_phase(raw["phase"])
        return cls(model, geometry, grid, pw_grid, solver, bool(raw["solver"].get("compensated_shortcut", True)),
                   gain, phase, phis, gains, raw["calibration"], bool(raw["degenerate"]), raw)

    def kernel_section(self) -> dict:
        """Everything that determines the transfer kernels; φ is deliberately absent."""
        return {"model": self.model.to_dict(), "geometry": self.geometry.to_dict(),
                "grid": self.grid.to_dict(), "solver": {"steps": self.solver.steps, "parity": self.solver.parity}}


def _parse_phase(v) -> float:
    if isinstance(v, str):
        table = {"pi": np.pi, "2pi": 2 * np.pi, "pi/2": np.pi / 2, "0": 0.0}
        if v not in table:
            raise ConfigError(f"phase string {v!r} not understood")
        v = table[v]
    v = float(v)
    if not 0.0 <= v <= 2 * np.pi:
        raise ConfigError("phase must lie in [0, 2π]")
    return v


def _phase_list(spec) -> np.ndarray:
    if spec is None:
        return default_phases(64)
    if isinstance(spec, list):
        arr = np.array([_parse_phase(p) for p in spec])
    else:
        num = int(spec.get("num", 64))
        if num < 5:
            raise ConfigError("a φ sweep needs at least 5 phases")
        if "start" in spec or "stop" in spec:
            arr = np.linspace(float(spec.get("start", 0.0)), float(spec.get("stop", 2 * np.pi)), num)
        else:
            arr = default_phases(num)
    if arr.size == 0:
        raise ConfigError("sweep.phi is empty")
    if np.any(arr < 0) or np.any(arr > 2 * np.pi):
        raise ConfigError("sweep phases must lie in [0, 2π]")
    return arr


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), default=float)


def cache_key(section: dict) -> str:
    return hashlib.sha256(canonical_json(section).encode()).hexdigest()


# --- output helpers ---------------------------------------------------------------

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def write_csv(path: Path, header: list, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            fh.write(",".join(fmt(v) for v in r) + "\n")


def _jsonable(o):
    if isinstance(o, dict):
        return {k: _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, (np.floating, float)):
        v = float(o)
        return v if np.isfinite(v) else str(v)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    return o


def write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


# --- orchestration ----------------------------------------------------------------

class Runner:
    def __init__(self, cfg: RunConfig, out: Path, cache: Path | None = None, threads: int = 1):
        self.cfg = cfg
        self.out = out
        self.cache = cache
        self.threads = max(int(threads), 1)
        self.kernel_solves = 0
        self.cache_hits = 0
        self.metrics: dict = {}
        self._lock = threading.Lock()
        self._calib: CalibrationTable | None = None

    # kernels
    def _pair(self, gamma: float, crystal_index: int) -> TransferPair:
        cfg = self.cfg
        geom = cfg.geometry
        if crystal_index == 1:
            geom = geom.with_configuration("single")
        section = dict(cfg.kernel_section(), geometry=geom.to_dict(), gamma=float(gamma), crystal=crystal_index)
        key = cache_key(section)
        if self.cache is not None:
            path = self.cache / f"{key}.npz"
            if path.exists():
                self._count("cache_hits")
                return load_pair(path)
        tp = solve_crystal(geom, cfg.model, gamma, cfg.grid, cfg.solver, crystal_index)
        self._count("kernel_solves")
        if self.cache is not None:
            self.cache.mkdir(parents=True, exist_ok=True)
            # unique temp name per writer; the rename publishes the file atomically
            tmp = self.cache / f"{key}.{os.getpid()}.{threading.get_ident()}.tmp.npz"
            save_pair(tp, tmp)
            os.replace(tmp, self.cache / f"{key}.npz")
        return tp

    def _count(self, name: str) -> None:
        with self._lock:
            setattr(self, name, getattr(self, name) + 1)

    def pair_set(self, gamma: float):
        tp1 = self._pair(gamma, 1)
        conf = self.cfg.geometry.configuration
        if conf == "single":
            raise ConfigError("interferometer commands need configuration 'compensated' or 'noncompensated'")
        if conf == "compensated" and self.cfg.compensated_shortcut:
            tp2 = compensated_second_from_first(tp1)
            self._count("kernel_solves")
        else:
            tp2 = self._pair(gamma, 2)
        return tp1, tp2

    # gain mapping
    def calibration(self) -> CalibrationTable:
        if self._calib is None:
            ref = self.cfg.calibration
            if ref:
                self._calib = CalibrationTable.load(ref)
            else:
                G_max = max([self.cfg.gain.get("G", 0.0)] + list(self.cfg.gains))
                self._calib = calibrate(self.cfg.geometry.with_configuration("single"), self.cfg.model,
                                        self.cfg.grid, steps=self.cfg.solver.steps,
                                        centers=_centers_for(G_max))
        return self._calib

    def gamma_for(self, G: float | None = None) -> tuple[float, float | None]:
        """(Γ, G); Γ is Γ0 for plane-wave pumps."""
        gain = self.cfg.gain if G is None else {"G": G}
        if "gamma" in gain:
            return float(gain["gamma"]), None
        G = float(gain["G"])
        if self.cfg.geometry.plane_wave:
            return G / self.cfg.geometry.length_L1, G
        return gamma_for_G(self.calibration(), G), G

    def record_identities(self, label: str, tp: TransferPair) -> None:
        self.metrics[label] = identity_residuals(tp)

    # commands
    def single_crystal(self) -> dict:
        cfg = self.cfg
        gamma, G = self.gamma_for()
        if cfg.geometry.plane_wave:
            t = single_crystal_pw(cfg.model, cfg.geometry.length_L1, gamma, cfg.pw_grid)
            sp = t.spectra()
            write_csv(self.out / "intensity.csv", ["theta_s", "q", "N_density", "C_density"],
                      zip(external_angle(cfg.model, sp.grid.q), sp.grid.q, sp.intensity_density,
                          sp.covariance_diagonal))
            return {"gamma0": gamma, "G": G, "N_density_tot": sp.total_density}
        tp = self._pair(gamma, 1)
        self.record_identities("crystal1", tp)
        n = intensity(tp)
        q = cfg.grid.q
        write_csv(self.out / "intensity.csv", ["theta_s", "q", "N"], zip(external_angle(cfg.model, q), q, n))
        cov = covariance(tp, cfg.degenerate)
        write_csv(self.out / "covariance.csv", ["q"] + [f"c{j}" for j in range(q.size)],
                  ([q[i]] + list(cov[i]) for i in range(q.size)))
        sd = decompose(tp)
        write_csv(self.out / "schmidt.csv", ["n", "Lambda", "lambda_normalized"], sd.table())
        summary = {"gamma": gamma, "G": G, "N_tot": total_photons(tp), "N_collinear_density": n[cfg.grid.center]}
        summary["K"] = schmidt_number(sd) if sd.n_modes else None
        return summary

    def su11(self) -> dict:
        cfg = self.cfg
        gamma, G = self.gamma_for()
        phi = cfg.phase
        if cfg.geometry.plane_wave:
            t1 = single_crystal_pw(cfg.model, cfg.geometry.length_L1, gamma, cfg.pw_grid)
            t2 = second_crystal_pw(cfg.model, cfg.geometry, gamma, cfg.pw_grid)
            n = compose_pw(t1, t2, phi).intensity_density
            n0 = compose_pw(t1, t2, 0.0).intensity_density
            q = cfg.pw_grid.q
        else:
            tp1, tp2 = self.pair_set(gamma)
            parts = composition_parts(tp1, tp2)
            tp = parts.at(phi)
            self.record_identities("composed", tp)
            n = intensity(tp)
            n0 = intensity(parts.at(0.0))
            q = cfg.grid.q
        write_csv(self.out / "intensity.csv", ["theta_s", "q", "N"], zip(external_angle(cfg.model, q), q, n))
        return {"gamma": gamma, "G": G, "phi": phi, "N_max": float(n.max()), "N_max_phi0": float(n0.max())}

    def _sweep(self, gamma: float):
        cfg = self.cfg
        phis = cfg.phis
        if cfg.geometry.plane_wave:
            t1 = single_crystal_pw(cfg.model, cfg.geometry.length_L1, gamma, cfg.pw_grid)
            t2 = second_crystal_pw(cfg.model, cfg.geometry, gamma, cfg.pw_grid)
            nt, cv = [], []
            for p in phis:
                sp = compose_pw(t1, t2, p).spectra()
                nt.append(sp.total_density)
                cv.append(float(quadrature(sp.covariance_diagonal, sp.grid)))
            n1 = t1.spectra().total_density
            return sensitivity_from_sweep(phis, nt, cv, n1), None
        tp1, tp2 = self.pair_set(gamma)
        parts = composition_parts(tp1, tp2)
        n1 = total_photons(tp1) * (2 if cfg.degenerate else 1)
        nt, cv = phase_sweep(parts, phis, cfg.degenerate)
        return sensitivity_from_sweep(phis, nt, cv, n1), tp1

    def sweep_phase(self) -> dict:
        gamma, G = self.gamma_for()
        rep, tp1 = self._sweep(gamma)
        if tp1 is not None:
            self.record_identities("crystal1", tp1)
        write_csv(self.out / "phase_sweep.csv", ["phi", "N_tot", "delta_phi", "f"],
                  zip(rep.phi_samples, rep.N_tot, rep.delta_phi, rep.f))
        return dict(rep.summary(), gamma=gamma, G=G)

    def _gain_point(self, G: float) -> dict:
        cfg = self.cfg
        gamma, _ = self.gamma_for(G)
        rep, tp1 = self._sweep(gamma)
        row = dict(rep.summary(), G=G, gamma=gamma)
        if tp1 is not None:
            sd = decompose(tp1)
            row["K"] = schmidt_number(sd)
            pw = single_crystal_pw(cfg.model, cfg.geometry.length_L1, G / cfg.geometry.length_L1, cfg.pw_grid)
            sp = pw.spectra()
            L_x = match_lx(total_photons(tp1), sp.total_density)
            row["L_x"] = L_x
            row["K_pw"] = schmidt_number_pw(sp, L_x)
            row["identity_max"] = max(identity_residuals(tp1).values())
        else:
            row["K"] = None
        return row

    def sweep_gain(self) -> dict:
        if not self.cfg.geometry.plane_wave and "gamma" not in self.cfg.gain:
            self.calibration()
        if self.threads > 1:
            with ThreadPoolExecutor(self.threads) as ex:
                rows = list(ex.map(self._gain_point, self.cfg.gains))
        else:
            rows = [self._gain_point(G) for G in self.cfg.gains]
        cols = ["G", "gamma", "f_min", "f_H", "Delta", "K", "K_pw", "L_x", "N1_tot"]
        write_csv(self.out / "gain_sweep.csv", cols,
                  ([r.get(c) if r.get(c) is not None else float("nan") for c in cols] for r in rows))
        return {"points": rows}

    def calibrate(self) -> dict:
        table = self.calibration()
        table.save(self.out / "calibration.json")
        return {"windows": len(table.windows), "A": {str(G): table.nearest(G).A for G in TABLE_GAINS
                                                        if table.G_range[0] <= G <= table.G_range[1]}}

    def run(self, command: str) -> dict:
        fn = {"single-crystal": self.single_crystal, "su11": self.su11, "sweep-phase": self.sweep_phase,
              "sweep-gain": self.sweep_gain, "calibrate": self.calibrate}[command]
        return fn()


def _centers_for(G_max: float, width: float = 0.25):
    # one tile beyond G_max so that G_max stays inside the fitted range
    top = width * (np.floor(G_max / width) + 1)
    return window_centers(top, width, [g for g in TABLE_GAINS if g <= top + width / 2])


def run(cfg: RunConfig, command: str, out, cache=None, threads: int = 1) -> dict:
    if command not in COMMANDS:
        raise ConfigError(f"unknown command {command!r}; expected one of {COMMANDS}")
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    runner = Runner(cfg, out, None if cache is None else Path(cache), threads)
    summary = runner.run(command)
    write_json(out / "summary.json", summary)
    manifest = {
        "command": command,
        "config_hash": cache_key(cfg.raw),
        "kernel_key": cache_key(cfg.kernel_section()),
        "kernel_solves": runner.kernel_solves,
        "cache_hits": runner.cache_hits,
        "convergence": runner.metrics,
        "version": __version__,
        "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    write_json(out / "manifest.json", manifest)
    return manifest


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="su11sim", description="Multimode SU(1,1) interferometer simulator")
    p.add_argument("--config", type=Path, help="JSON run configuration (defaults are used for missing fields)")
    p.add_argument("--command", required=True, choices=COMMANDS)
    p.add_argument("--out", type=Path, default=Path("su11_out"))
    p.add_argument("--threads", type=int, default=1, help="parallel parameter points in sweep-gain")
    p.add_argument("--cache", type=Path, default=None, help=f"kernel cache directory (env {CACHE_ENV})")
    p.add_argument("--configuration", choices=("single", "noncompensated", "compensated"),
                   help="override geometry.configuration")
    p.add_argument("--phase", help="override the interferometer phase (number or 'pi')")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        d = json.loads(args.config.read_text()) if args.config else {}
        if args.configuration:
            d.setdefault("geometry", {})["configuration"] = args.configuration
        if args.phase is not None:
            try:
                d["phase"] = float(args.phase)
            except ValueError:
                d["phase"] = args.phase
        cfg = RunConfig.from_dict(d)
        cache = args.cache or (Path(os.environ[CACHE_ENV]) if os.environ.get(CACHE_ENV) else None)
        run(cfg, args.command, args.out, cache, args.threads)
    except (json.JSONDecodeError, OSError) as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DivergenceError as exc:
        print(f"solver diverged: {exc}", file=sys.stderr)
        return 3
    except Su11Error as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
