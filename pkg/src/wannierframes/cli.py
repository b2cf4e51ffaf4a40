"""Command line runner: ``wannierframes run | validate | models``.

A run goes model -> bands -> gap -> projectors -> Chern numbers -> frame ->
Wannier functions -> report.  Every stage appends to ``report.txt``; when a
stage fails the partial report is still written and ends with a single
``result:`` line carrying the exit code, error kind, stage and reason.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import RunConfig, build_model, load_config, validate
from .errors import CertificateRejected, ConfigError, WannierFramesError
from .frames import parseval_sections
from .lattice import kgrid
from .models import gallery
from .spectral import SpectralWindow, band_structure, bands_table, gap_check, projector_field
from .topology import ChernReport, chern_report, plane_label
from .wannier import parseval_identity_check, shells_table, coefficients_table, synthesize

__all__ = ["RunResult", "run", "main", "write_atomic"]

TIMESTAMP_PREFIX = "timestamp: "


def write_atomic(path: Path, text: str) -> None:
    """Write via a temporary file in the same directory and rename over ``path``."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="\n") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)  # mkstemp creates owner-only files
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


@dataclass
class RunResult:
    exit_code: int
    report: str
    files: dict = field(default_factory=dict)  # file name -> text
    reason: str = "ok"

    @property
    def ok(self) -> bool:
        return self.exit_code == 0


def _fmt(x: float) -> str:
    return f"{x:.6e}"


def _chern_text(report: ChernReport) -> str:
    lines = ["plane,chern,residual"]
    for plane, c in report.chern.items():
        lines.append(f"{plane_label(plane)},{c},{report.residuals[plane]:.3e}")
    return "\n".join(lines) + "\n"


def _frame_text(cert, sections, embedding_note: str) -> str:
    lines = [
        f"route: {cert.route}",
        f"l: {cert.l}",
        f"accepted: {'yes' if cert.accepted else 'no'}",
        f"tolerance: {cert.tol:.1e}",
        f"max_parseval_residual: {cert.max_parseval_residual:.3e}",
        f"frame_bounds: {cert.frame_bounds[0]:.12f} {cert.frame_bounds[1]:.12f}",
        f"smoothness: {_fmt(cert.smoothness)}",
        f"embedding_attempts: {cert.embedding_attempts}",
        embedding_note,
        "section,min_norm2,max_norm2,mean_norm2",
    ]
    norms = (np.abs(sections.values) ** 2).sum(axis=-2)
    for j in range(sections.count):
        n = norms[..., j]
        lines.append(f"{j + 1},{_fmt(n.min())},{_fmt(n.max())},{_fmt(n.mean())}")
    return "\n".join(lines) + "\n"


def run(config: RunConfig, write: bool = True, timestamp: str | None = None) -> RunResult:
    """Execute the pipeline; never raises for documented failure modes."""
    stamp = timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    lines = [f"wannierframes {__version__} run report", TIMESTAMP_PREFIX + stamp, "", "[config]"]
    lines += config.summary_lines()
    files: dict[str, str] = {}
    stage = "config"

    def finish(code: int, reason: str) -> RunResult:
        lines.append("")
        lines.append(reason)
        report = "\n".join(lines) + "\n"
        result = RunResult(code, report, files, reason)
        if write:
            out = Path(config.output_dir)
            out.mkdir(parents=True, exist_ok=True)
            for name, text in files.items():
                write_atomic(out / name, text)
            write_atomic(out / "report.txt", report)
        return result

    diags = validate(config)
    if diags:
        lines.append("")
        lines.append("[diagnostics]")
        lines += [str(d) for d in diags]
        return finish(2, f"result: FAIL code=2 kind=config stage=config reason={diags[0].key}: {diags[0].message}")

    try:
        stage = "model"
        model = build_model(config)
        grid = kgrid(model.lattice, config.grid)
        lines += ["", "[model]", f"name: {model.name}", f"dimension: {model.dim}",
                  f"fiber_dim: {model.fiber_dim}", f"hopping_range: {model.hopping_range}"]

        stage = "gap"
        window = (
            SpectralWindow.interval(*config.energy) if config.energy is not None
            else SpectralWindow.bands(config.window_lo, config.window_hi)
        )
        bands = band_structure(model, grid)
        if config.emit["bands"]:
            files["bands.csv"] = bands_table(bands)
        gap = gap_check(bands, window, config.gap_tol)
        lines += ["", "[gap]", f"window: bands {gap.lo}..{gap.hi} (m = {gap.m})",
                  f"gap_below: {_fmt(gap.gap_below)}", f"gap_above: {_fmt(gap.gap_above)}",
                  f"window_energy: {_fmt(gap.window_min)} {_fmt(gap.window_max)}"]

        stage = "projectors"
        window = SpectralWindow.bands(gap.lo, gap.hi)
        proj = projector_field(model, grid, window, config.projector, config.q_pts, config.gap_tol, bands)
        res = proj.residuals()
        lines += ["", "[projectors]", f"method: {config.projector}"]
        lines += [f"{k}: {v:.3e}" for k, v in res.items()]

        stage = "chern"
        report = chern_report(proj) if grid.dim >= 2 else ChernReport({}, {})
        if config.emit["chern"]:
            files["chern.txt"] = _chern_text(report)
        lines += ["", "[chern]"]
        lines += [f"{plane_label(p)}: {c} (residual {report.residuals[p]:.3e})" for p, c in report.chern.items()]
        lines.append(f"bundle: {'trivial' if report.trivial else 'nontrivial'}")

        stage = "frame"
        sections, cert = parseval_sections(
            proj, report, config.route, config.seed, config.method, config.residual_tol
        )
        note = f"embedding: {'random map into Ran(I - P)' if cert.route == 'embedded' else 'none'}"
        if config.emit["frame"]:
            files["frame.txt"] = _frame_text(cert, sections, note)
        lines += ["", "[frame]", f"route: {cert.route}", f"l: {cert.l}",
                  f"max_parseval_residual: {cert.max_parseval_residual:.3e}",
                  f"frame_bounds: {cert.frame_bounds[0]:.12f} {cert.frame_bounds[1]:.12f}",
                  f"smoothness: {_fmt(cert.smoothness)}",
                  f"accepted: {'yes' if cert.accepted else 'no'}"]
        if not cert.accepted:
            raise CertificateRejected(
                f"residual {cert.max_parseval_residual:.3e} or bounds {cert.frame_bounds} outside {cert.tol:.1e}"
            )

        stage = "wannier"
        wan = synthesize(sections, cert, config.fit_range)
        if config.emit["wannier"]:
            files["wannier_coeffs.csv"] = coefficients_table(wan)
        if config.emit["plots"]:
            files["wannier_shells.csv"] = shells_table(wan)
        lines += ["", "[decay]", "function,fit_range,rate,r2,super_exponential,directional_rates"]
        for j, prof in enumerate(wan.profiles):
            if prof is None:
                lines.append(f"{j + 1},-,-,-,-,- (box too small for a fit)")
                continue
            iso = prof.isotropic
            rate = "-" if iso.rate is None else f"{iso.rate:.6f}"
            r2 = "-" if iso.r2 is None else f"{iso.r2:.6f}"
            dirs = " ".join("-" if d.rate is None else f"{d.rate:.6f}" for d in prof.directional)
            lo, hi = prof.fit_range
            lines.append(f"{j + 1},{lo}..{hi},{rate},{r2},{'yes' if iso.super_exponential else 'no'},{dirs}")

        stage = "parseval"
        err = parseval_identity_check(wan, proj, config.parseval_trials, config.seed)
        lines += ["", "[parseval]", f"trials: {config.parseval_trials}", f"max_relative_error: {err:.3e}"]
        if err > config.residual_tol:
            raise CertificateRejected(f"real-space Parseval error {err:.3e} exceeds {config.residual_tol:.1e}")
    except WannierFramesError as exc:
        reason = str(exc).replace("\n", " ")
        return finish(
            exc.exit_code, f"result: FAIL code={exc.exit_code} kind={exc.kind} stage={stage} reason={reason}"
        )
    return finish(0, "result: OK code=0")


# ------------------------------------------------------------------ argparse


def _grid_arg(text: str) -> tuple[int, ...]:
    try:
        sizes = tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected N1[,N2[,N3]], got {text!r}") from None
    if not 1 <= len(sizes) <= 3:
        raise argparse.ArgumentTypeError("between one and three grid sizes")
    return sizes


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wannierframes", description="Parseval frames of Wannier functions")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("run", "run the full pipeline"), ("validate", "check a config without numerics")):
        s = sub.add_parser(name, help=helptext)
        s.add_argument("--config", required=True, metavar="PATH")
        s.add_argument("--seed", type=int)
        s.add_argument("--out", metavar="DIR")
        s.add_argument("--route", choices=("auto", "basis", "augmented", "embedded"))
        s.add_argument("--grid", type=_grid_arg, metavar="N1[,N2[,N3]]")
    sub.add_parser("models", help="list the built-in model gallery")
    return p


def main(argv=None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        # argparse exits with 2 on usage errors, which is also the config code
        return int(exc.code or 0)

    if args.command == "models":
        for name, (defaults, doc) in gallery().items():
            params = ", ".join(f"{k}={v:g}" for k, v in defaults.items())
            print(f"{name}({params})  {doc}")
        return 0

    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"result: FAIL code=2 kind=config stage=config reason={exc}", file=sys.stderr)
        return 2
    config = config.with_overrides(args.seed, args.out, args.route, args.grid)

    if args.command == "validate":
        diags = validate(config)
        for d in diags:
            print(d)
        if not diags:
            print("config ok")
        return 2 if diags else 0

    result = run(config)
    if result.ok:
        print(f"result: OK code=0 out={config.output_dir}")
    else:
        print(result.reason, file=sys.stderr)
    return result.exit_code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
