"""Command-line interface: ``binspatial {eval,simulate,gradcheck,fit}``.

Exit codes: 0 success, 1 gradient check failed, 2 I/O error (or a batch
item that could not be evaluated), 3 malformed manifest, scene or argument.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import shlex
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from binspatial import fitter, grad, metrics, scene, schema, wave_io
from binspatial.config import (
    BETA_PRESETS,
    FR_THRESHOLD_DB,
    STFT_HOP,
    STFT_WINDOW,
    TAU_S,
    EvalConfig,
    LossWeights,
    SpatialKind,
    StftConfig,
)
from binspatial.errors import BinspatialError, DivergenceDetected, IoFailure

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_IO = 2
EXIT_INPUT = 3

CSV_COLUMNS = metrics.REPORT_FIELDS + ("count", "failure_rate_pct", "error")


class UsageError(Exception):
    """Bad manifest, scene or option value (exit 3)."""


def _common_options() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("analysis options")
    g.add_argument("--stft-window", type=int, default=STFT_WINDOW, help="Hann window length (samples)")
    g.add_argument("--stft-hop", type=int, default=STFT_HOP, help="STFT hop (samples)")
    g.add_argument("--stft-fft", type=int, default=None, help="FFT length (default: window length)")
    g.add_argument("--tau-ms", type=float, default=TAU_S * 1e3, help="lag window for ITD terms (ms)")
    g.add_argument("--alpha", type=float, default=None, help="signal-loss weight (default 1)")
    g.add_argument("--beta", type=float, default=None, help="spatial-loss weight (default: preset of --spatial)")
    g.add_argument("--spatial", choices=[k.value for k in SpatialKind], default=None, help="spatial loss term")
    g.add_argument("--fr-threshold-db", type=float, default=FR_THRESHOLD_DB, help="failure-rate threshold (dB)")
    g.add_argument("--format", choices=("json", "csv"), default="json", help="report format (eval only)")
    g.add_argument("--jobs", type=int, default=1, help="parallel workers for batch evaluation")
    g.add_argument("--seed", type=int, default=None, help="base seed")
    g.add_argument("-o", "--out", default=None, help="write the report here instead of stdout")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common_options()
    parser = argparse.ArgumentParser(prog="binspatial", description="Binaural spatial-cue losses and metrics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", parents=[common], help="evaluate a (mixture, reference, estimate) triplet or a manifest")
    p.add_argument("paths", nargs="*", metavar="WAV", help="mixture.wav reference.wav estimate.wav")
    p.add_argument("--manifest", help="file with one 'id mixture reference estimate' line per item")
    p.add_argument("--id", default="item", dest="item_id", help="item id for a single triplet")

    p = sub.add_parser("simulate", parents=[common], help="render a scene to mixture.wav / target.wav")
    p.add_argument("scene", help="SceneSpec JSON file")
    p.add_argument("out_dir", help="output directory")
    p.add_argument("--write-sources", action="store_true", help="also write source_<k>.wav per rendered source")

    p = sub.add_parser("gradcheck", parents=[common], help="check analytic gradients against finite differences")
    p.add_argument("--loss", action="append", choices=[k.value for k in grad.LossKind],
                   help="loss to check (repeatable; default: all)")
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--num-samples", type=int, default=4096)
    p.add_argument("--coords", type=int, default=64, help="coordinates per trial")
    p.add_argument("--corrupt", action="store_true", help=argparse.SUPPRESS)

    p = sub.add_parser("fit", parents=[common], help="fit gain and delay of a rendered source to a target")
    p.add_argument("target", help="binaural target WAV")
    p.add_argument("source", help="mono source WAV (stereo files are averaged)")
    p.add_argument("--init-gain-db", type=float, default=0.0)
    p.add_argument("--init-delay", type=float, default=0.0, help="initial delay (samples)")
    p.add_argument("--lr-gain", type=float, default=fitter.FitOptions.learning_rate[0])
    p.add_argument("--lr-delay", type=float, default=fitter.FitOptions.learning_rate[1])
    p.add_argument("--max-iters", type=int, default=fitter.FitOptions.max_iters)
    p.add_argument("--tol", type=float, default=fitter.FitOptions.tol)
    p.add_argument("--no-continuation", action="store_true", help="descend on the full-band loss only")
    return parser


def _stft(args) -> StftConfig:
    return StftConfig(args.stft_window, args.stft_hop, args.stft_fft or args.stft_window)


def _weights(args, default: LossWeights) -> LossWeights:
    if args.alpha is None and args.beta is None and args.spatial is None:
        return default
    kind = SpatialKind(args.spatial) if args.spatial is not None else default.spatial_kind
    beta = args.beta if args.beta is not None else BETA_PRESETS.get(kind, 0.0)
    alpha = args.alpha if args.alpha is not None else default.alpha
    return LossWeights(alpha=alpha, beta=beta, spatial_kind=kind)


def _eval_config(args) -> EvalConfig:
    weights = _weights(args, LossWeights())
    return EvalConfig(_stft(args), args.tau_ms / 1e3, weights, args.fr_threshold_db, args.format)


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"{out}: {exc}") from exc


def _dumps(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


# -- eval ---------------------------------------------------------------------

def read_manifest(path: str | Path) -> list[tuple[str, str, str, str]]:
    """Parse ``id mixture reference estimate`` lines; paths are relative to the manifest."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError as exc:
        raise IoFailure(f"{path}: no such file") from exc
    except UnicodeDecodeError as exc:
        raise UsageError(f"{path}: not UTF-8") from exc
    except OSError as exc:
        raise IoFailure(f"{path}: {exc}") from exc
    items, seen = [], set()
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        try:
            fields = shlex.split(line, comments=True)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: {exc}") from exc
        if len(fields) != 4:
            raise UsageError(f"{path}:{lineno}: expected 'id mixture reference estimate', got {len(fields)} fields")
        item_id, *wavs = fields
        if item_id in seen:
            raise UsageError(f"{path}:{lineno}: duplicate id {item_id!r}")
        seen.add(item_id)
        items.append((item_id, *(str(path.parent / w) for w in wavs)))
    if not items:
        raise UsageError(f"{path}: no items")
    return items


def evaluate_item(item, config: EvalConfig) -> dict:
    """One report row; failures become ``{"item_id", "error"}`` rows."""
    item_id, mix_path, ref_path, est_path = item
    try:
        mixture, reference, estimate = (wave_io.read_wav(p) for p in (mix_path, ref_path, est_path))
        return metrics.evaluate_pair(mixture, reference, estimate, config, item_id).to_dict()
    except (BinspatialError, OSError, ValueError) as exc:
        return {"item_id": item_id, "error": f"{type(exc).__name__}: {exc}"}


def _evaluate_star(payload):
    return evaluate_item(*payload)


def evaluate_items(items, config: EvalConfig, jobs: int = 1) -> list[dict]:
    """Rows in input order, whatever the completion order."""
    payloads = [(item, config) for item in items]
    if jobs > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_evaluate_star, payloads))
    return [_evaluate_star(p) for p in payloads]


def _aggregate(rows, threshold_db: float) -> dict | None:
    good = [metrics.MetricReport(**r) for r in rows if "error" not in r]
    return metrics.aggregate(good, threshold_db) if good else None


def _config_dict(config: EvalConfig) -> dict:
    w = config.weights
    return {
        "stft": {"window_len": config.stft.window_len, "hop": config.stft.hop, "fft_len": config.stft.fft_len},
        "tau_s": config.tau_s,
        "weights": {"alpha": w.alpha, "beta": w.beta, "spatial_kind": w.spatial_kind.value},
        "fr_threshold_db": config.fr_threshold_db,
    }


def format_report(rows, aggregate, config: EvalConfig) -> str:
    if config.output_format == "json":
        return _dumps({"config": _config_dict(config), "items": rows, "aggregate": aggregate})
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, restval="", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    if aggregate is not None:
        writer.writerow(aggregate)
    return buf.getvalue()


def cmd_eval(args) -> int:
    config = _eval_config(args)
    if args.manifest:
        if args.paths:
            raise UsageError("give either three WAV paths or --manifest, not both")
        items = read_manifest(args.manifest)
    elif len(args.paths) == 3:
        for p in args.paths:
            if not Path(p).is_file():
                raise IoFailure(f"{p}: no such file")
        items = [(args.item_id, *args.paths)]
    else:
        raise UsageError("eval needs mixture.wav reference.wav estimate.wav, or --manifest")
    rows = evaluate_items(items, config, args.jobs)
    failed = [r for r in rows if "error" in r]
    if len(items) == 1 and failed:
        print(f"binspatial: {failed[0]['error']}", file=sys.stderr)
        return EXIT_IO
    _emit(format_report(rows, _aggregate(rows, config.fr_threshold_db), config), args.out)
    for r in failed:
        print(f"binspatial: item {r['item_id']}: {r['error']}", file=sys.stderr)
    return EXIT_IO if failed else EXIT_OK


# -- simulate -----------------------------------------------------------------

def load_scene(path: str | Path, base_seed: int = 0) -> scene.SceneSpec:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise IoFailure(f"{path}: no such file") from exc
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise UsageError(f"{path}: invalid JSON ({exc})") from exc
    try:
        schema.validate(doc, "scene")
        return scene.SceneSpec.from_dict(doc, base_seed)
    except jsonschema.ValidationError as exc:
        raise UsageError(f"{path}: {exc.message}") from exc
    except (TypeError, ValueError) as exc:
        raise UsageError(f"{path}: {exc}") from exc


def cmd_simulate(args) -> int:
    spec = load_scene(args.scene, args.seed or 0)
    try:
        rendered, noise = scene.render_scene(spec)
    except (OSError, IoFailure) as exc:
        raise IoFailure(str(exc)) from exc
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    mixture = rendered[0]
    for part in rendered[1:] + ([noise] if noise is not None else []):
        mixture = mixture + part
    out = Path(args.out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"{out}: {exc}") from exc
    wave_io.write_wav(out / "mixture.wav", mixture)
    wave_io.write_wav(out / "target.wav", rendered[spec.target_index])
    files = {"mixture": "mixture.wav", "target": "target.wav"}
    if args.write_sources:
        for k, part in enumerate(rendered):
            wave_io.write_wav(out / f"source_{k}.wav", part)
            files[f"source_{k}"] = f"source_{k}.wav"
    echo = {"scene": spec.to_dict(), "ground_truth": scene.ground_truth(spec), "files": files}
    _emit(_dumps(echo), str(out / "scene-echo.json"))
    return EXIT_OK


# -- gradcheck ----------------------------------------------------------------

def cmd_gradcheck(args) -> int:
    kinds = [grad.LossKind(k) for k in (args.loss or [k.value for k in grad.LossKind])]
    weights = _weights(args, grad.DEFAULT_COMBINED)
    stft = _stft(args)
    max_lag = int(round(args.tau_ms / 1e3 * 44100))
    reports = []
    for kind in kinds:
        report = grad.grad_check(kind, trials=args.trials, num_samples=args.num_samples, seed=args.seed or 0,
                                 num_coords=args.coords, weights=weights, stft=stft, max_lag=max_lag,
                                 raise_on_fail=False, corrupt=args.corrupt)
        d = report.to_dict()
        d["loss_kind"] = grad.LossKind(d["loss_kind"]).value
        reports.append(d)
        verdict = "PASS" if report.passed else "FAIL"
        print(f"{verdict} {d['loss_kind']}: max_rel_error={report.max_rel_error:.3e} "
              f"(threshold {report.threshold:.0e}, {report.num_points_checked} points)", file=sys.stderr)
    passed = all(r["passed"] for r in reports)
    _emit(_dumps({"passed": passed, "reports": reports}), args.out)
    return EXIT_OK if passed else EXIT_CHECK_FAILED


# -- fit ----------------------------------------------------------------------

def cmd_fit(args) -> int:
    target = wave_io.read_wav(args.target)
    mono, rate = wave_io.read_mono(args.source)
    if rate != target.sample_rate_hz or mono.size != target.num_samples:
        raise UsageError("source and target differ in length or sample rate")
    init = fitter.RendererParams(args.init_gain_db, args.init_delay)
    max_lag = int(round(args.tau_ms / 1e3 * target.sample_rate_hz))
    if not (np.isfinite(init.gain_diff_db) and abs(init.delay_samples) <= max_lag):
        raise UsageError(f"initial parameters {init} outside bounds (|delay| <= {max_lag})")
    schedule = ((1.0, args.max_iters),) if args.no_continuation else fitter.DEFAULT_SCHEDULE
    opt = fitter.FitOptions(learning_rate=(args.lr_gain, args.lr_delay), max_iters=args.max_iters, tol=args.tol,
                            schedule=schedule, stft=_stft(args), max_lag=max_lag)
    try:
        result = fitter.fit_renderer(mono, target, init, _weights(args, fitter.fitter_weights()), opt)
    except DivergenceDetected as exc:
        print(f"binspatial: {exc}", file=sys.stderr)
        return EXIT_CHECK_FAILED
    _emit(_dumps(result.to_dict()), args.out)
    return EXIT_OK


COMMANDS = {"eval": cmd_eval, "simulate": cmd_simulate, "gradcheck": cmd_gradcheck, "fit": cmd_fit}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.jobs < 1:
            raise UsageError("--jobs must be >= 1")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"binspatial: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (IoFailure, OSError) as exc:
        print(f"binspatial: {exc}", file=sys.stderr)
        return EXIT_IO
    except BinspatialError as exc:
        print(f"binspatial: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"binspatial: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
