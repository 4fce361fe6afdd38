"""Command-line interface.

Subcommands cover the whole loop: ``sample`` selects shots, ``label``
collects binary labels (interactively or from a CSV), ``train`` fits the
classifier, ``eval`` scores a pool, ``verify-lemmas`` runs the support-set
theory suites, ``bench`` runs the synthetic benchmark end to end, and
``serve`` starts the annotation HTTP service.

Exit codes: 0 success, 1 runtime error, 2 usage/config error. Failures print
one JSON object ``{code, message, details}`` on stderr.
"""

from __future__ import annotations

import json
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .classifier import KernelSpec, deserialize_svm, serialize_svm, train_svm
from .embedding_io import (
    load_labels,
    load_pool,
    load_query,
    pool_gt_labels,
    pool_vectors,
    save_labels,
    save_pool_binary,
    save_pool_jsonl,
    save_query,
)
from .errors import (
    AnnotationIncompleteError,
    ConfigError,
    EmptyBandError,
    FlameError,
    FormatError,
    InsufficientSamplesError,
    UnknownShotError,
)
from .numerics import cosine_similarities
from .pipeline import (
    SyntheticBenchmarkSpec,
    candidate_payload,
    evaluate,
    generate_synthetic_benchmark,
    make_file_oracle,
    run_flame,
    sample_shots,
    train_from_labels,
    score_pool,
)
from .sampler import FlameConfig
from .support_theory import (
    extend_reduced_kkt,
    homogeneous_gradient_flow_experiment,
    kkt_check_hard_margin,
    kkt_check_soft_margin,
    overlapping_instance,
    retrain_on_support,
    separable_instance,
    two_blob_instance,
)

USAGE_ERRORS = (ConfigError, InsufficientSamplesError, EmptyBandError,
                FormatError, UnknownShotError)


def _fail(exc: Exception) -> None:
    if isinstance(exc, FlameError):
        payload = exc.to_payload()
        code = 2 if isinstance(exc, USAGE_ERRORS) else 1
    else:
        payload = {"code": "error", "message": str(exc), "details": {}}
        code = 1
    click.echo(json.dumps(payload), err=True)
    sys.exit(code)


def _load_config(path: str | None, seed: int | None) -> FlameConfig:
    data: dict = {}
    if path:
        raw = Path(path).read_bytes()
        if path.endswith(".toml"):
            data = tomllib.loads(raw.decode("utf-8"))
        else:
            data = json.loads(raw.decode("utf-8"))
    if seed is not None:
        data["seed"] = seed
    return FlameConfig.from_dict(data)


def _write_json(path: Path, doc) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


@click.group()
def main():
    """Few-shot adaptation toolkit for detection-proposal embeddings."""


@main.command()
@click.option("--pool", "pool_path", required=True, type=click.Path(exists=True))
@click.option("--query", "query_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--out-dir", default=".", type=click.Path())
def sample(pool_path, query_path, config_path, seed, out_dir):
    """Select the marginal, diverse shots for labeling."""
    try:
        config = _load_config(config_path, seed)
        pool = load_pool(pool_path)
        query = load_query(query_path)
        selection, shot_ids = sample_shots(pool, query, config)
        candidates = candidate_payload(pool, query, config, selection, shot_ids)
        doc = {
            "shot_ids": shot_ids,
            "candidates": candidates,
            "requested_k": selection.requested_k,
            "effective_k": selection.effective_k,
            "band_size": int(selection.band.member_indices.size),
            "config": config.to_dict(),
        }
        out = Path(out_dir) / "shots.json"
        _write_json(out, doc)
        click.echo(str(out))
    except Exception as exc:
        _fail(exc)


@main.command()
@click.option("--shots", "shots_path", required=True, type=click.Path(exists=True))
@click.option("--from-file", "from_file", type=click.Path(exists=True),
              help="Read labels from an existing CSV instead of prompting.")
@click.option("--annotator", default="cli")
@click.option("--out-dir", default=".", type=click.Path())
def label(shots_path, from_file, annotator, out_dir):
    """Label the selected shots (interactive y/n, or import a CSV)."""
    try:
        doc = json.loads(Path(shots_path).read_text(encoding="utf-8"))
        shot_ids = list(doc["shot_ids"])
        by_id = {c["shot_id"]: c for c in doc.get("candidates", [])}
        out = Path(out_dir) / "labels.csv"
        out.parent.mkdir(parents=True, exist_ok=True)
        if from_file:
            labels = load_labels(from_file, valid_ids=set(shot_ids))
        else:
            labels = {}
            try:
                for shot_id in shot_ids:
                    sim = by_id.get(shot_id, {}).get("similarity")
                    hint = f" (similarity {sim:.3f})" if sim is not None else ""
                    answer = click.prompt(
                        f"shot {shot_id}{hint} positive? [y/n]",
                        type=click.Choice(["y", "n"]))
                    labels[shot_id] = 1 if answer == "y" else 0
            except (KeyboardInterrupt, click.Abort) as exc:
                if labels:  # keep whatever was collected
                    save_labels(labels, out, annotator=annotator)
                raise AnnotationIncompleteError(
                    f"labeling aborted after {len(labels)} of {len(shot_ids)} "
                    f"shots; partial labels saved to {out}",
                    partial_labels=labels) from exc
        save_labels(labels, out, annotator=annotator)
        click.echo(str(out))
    except Exception as exc:
        _fail(exc)


@main.command()
@click.option("--pool", "pool_path", required=True, type=click.Path(exists=True))
@click.option("--query", "query_path", required=True, type=click.Path(exists=True))
@click.option("--labels", "labels_path", required=True, type=click.Path(exists=True))
@click.option("--config", "config_path", type=click.Path(exists=True))
@click.option("--seed", type=int, default=None)
@click.option("--out-dir", default=".", type=click.Path())
def train(pool_path, query_path, labels_path, config_path, seed, out_dir):
    """Train the classifier from collected labels."""
    try:
        config = _load_config(config_path, seed)
        pool = load_pool(pool_path)
        query = load_query(query_path)
        labels = load_labels(labels_path)
        model, _ = train_from_labels(pool, query, labels, config)
        out = Path(out_dir) / "model.json"
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(serialize_svm(model), encoding="utf-8")
        click.echo(str(out))
    except Exception as exc:
        _fail(exc)


@main.command("eval")
@click.option("--model", "model_path", required=True, type=click.Path(exists=True))
@click.option("--pool", "pool_path", required=True, type=click.Path(exists=True))
@click.option("--query", "query_path", required=True, type=click.Path(exists=True))
@click.option("--out-dir", default=".", type=click.Path())
def eval_cmd(model_path, pool_path, query_path, out_dir):
    """Score a pool with a trained model and report PR/AP against gt."""
    try:
        model = deserialize_svm(Path(model_path).read_text(encoding="utf-8"))
        pool = load_pool(pool_path)
        query = load_query(query_path)
        ids, scores = score_pool(model, pool, query)
        ordered = sorted(pool, key=lambda rec: rec.id)
        gt = pool_gt_labels(ordered)
        if gt is None:
            raise ConfigError(
                "pool has no complete ground truth; evaluation needs gt labels")
        report = evaluate(scores, gt)
        baseline = cosine_similarities(pool_vectors(ordered), query)
        report.baseline_ap = evaluate(baseline, gt).average_precision
        out_dir = Path(out_dir)
        _write_json(out_dir / "report.json", {
            "ap_flame": report.average_precision,
            "ap_baseline": report.baseline_ap,
            **report.to_dict(),
        })
        curve_path = out_dir / "pr_curve.csv"
        with open(curve_path, "w", encoding="utf-8") as fh:
            fh.write("recall,precision\n")
            for recall, precision in report.curve:
                fh.write(f"{recall},{precision}\n")
        click.echo(str(out_dir / "report.json"))
    except Exception as exc:
        _fail(exc)


@main.command("verify-lemmas")
@click.option("--instances", default=20, show_default=True,
              help="Instances per SVM suite.")
@click.option("--steps", default=50000, show_default=True,
              help="Gradient steps for the homogeneous-network experiment.")
@click.option("--out-dir", default="lemma_reports", type=click.Path())
def verify_lemmas(instances, steps, out_dir):
    """Run the four support-set verification suites and print a table."""
    from .support_theory import HARD_MARGIN_C

    out_dir = Path(out_dir)
    rows = []
    try:
        # Suite 1: hard-margin KKT residuals on separable instances.
        worst = 0.0
        ok = True
        for seed in range(instances):
            X, y = separable_instance(seed)
            model = train_svm(X, y, HARD_MARGIN_C, KernelSpec(kind="linear"),
                              tol=1e-8)
            report = kkt_check_hard_margin(model, X, y)
            worst = max(worst, report.stationarity_residual,
                        report.primal_violation, report.dual_violation,
                        report.slackness_residual)
            ok = ok and report.passed
        rows.append(("hard_margin_kkt", ok, f"worst residual {worst:.2e}"))

        # Suite 2: hard-margin retrain-on-support equivalence.
        worst_w = 0.0
        agree = 1.0
        ok = True
        for seed in range(instances):
            X, y = separable_instance(seed)
            report = retrain_on_support(X, y, HARD_MARGIN_C,
                                        KernelSpec(kind="linear"))
            ok = ok and report.error is None and (
                report.weight_relative_error <= 1e-4
                and report.bias_error <= 1e-4
                and report.prediction_agreement == 1.0)
            worst_w = max(worst_w, report.weight_relative_error or 0.0)
            agree = min(agree, report.prediction_agreement)
        rows.append(("hard_margin_retrain", ok,
                     f"worst weight err {worst_w:.2e}, agreement {agree}"))

        # Suite 3: soft-margin KKT + multiplier extension, rbf.
        ok = True
        worst = 0.0
        for seed in range(instances):
            X, y = overlapping_instance(seed)
            for C in (0.5, 1.0, 10.0):
                kernel = KernelSpec(kind="rbf", gamma=1.0)
                model = train_svm(X, y, C, kernel, tol=1e-8)
                report = kkt_check_soft_margin(model, X, y, C)
                support = np.asarray(model.support_indices)
                reduced = train_svm(X[support], y[support], C, kernel, tol=1e-8)
                extension = extend_reduced_kkt(reduced, X, y, C, support)
                equiv = retrain_on_support(X, y, C, kernel)
                ok = ok and report.passed and extension.passed and (
                    equiv.error is None
                    and equiv.prediction_agreement >= 0.999)
                worst = max(worst, report.slackness_residual,
                            extension.slackness_residual)
        rows.append(("soft_margin_kkt_extension", ok,
                     f"worst slackness {worst:.2e}"))

        # Suite 4: homogeneous-network support experiment.
        X, y = two_blob_instance(2)
        report = homogeneous_gradient_flow_experiment(
            X, y, hidden=16, steps=steps, lr=0.05, seed=2)
        ok = report.prediction_agreement >= 0.99
        rows.append(("homogeneous_network", ok,
                     f"agreement {report.prediction_agreement:.4f}, "
                     f"direction cosine {report.direction_cosine:.4f}"))
        _write_json(out_dir / "homogeneous_network.json",
                    json.loads(report.to_json()))

        width = max(len(name) for name, _, _ in rows)
        for name, passed, detail in rows:
            status = "PASS" if passed else "FAIL"
            click.echo(f"{name.ljust(width)}  {status}  {detail}")
        _write_json(out_dir / "summary.json", {
            name: {"passed": passed, "detail": detail}
            for name, passed, detail in rows})
        if not all(passed for _, passed, _ in rows):
            sys.exit(1)
    except Exception as exc:
        _fail(exc)


@main.command()
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--dim", type=int, default=64, show_default=True)
@click.option("--pool-size", type=int, default=5000, show_default=True)
@click.option("--positive-fraction", type=float, default=0.3, show_default=True)
@click.option("--separation", type=float, default=8.0, show_default=True)
@click.option("--overlap", type=float, default=0.9, show_default=True)
@click.option("--shots", "shots_k", type=int, default=30, show_default=True)
@click.option("--format", "pool_format", type=click.Choice(["json", "binary"]),
              default="json", show_default=True,
              help="Encoding for the emitted benchmark pool file.")
@click.option("--out-dir", default=".", type=click.Path())
def bench(seed, dim, pool_size, positive_fraction, separation, overlap,
          shots_k, pool_format, out_dir):
    """Run the synthetic benchmark end to end with the ground-truth oracle."""
    try:
        spec = SyntheticBenchmarkSpec(
            dim=dim, pool_size=pool_size, positive_fraction=positive_fraction,
            separation=separation, overlap=overlap, seed=seed)
        records, query = generate_synthetic_benchmark(spec)
        out_root = Path(out_dir)
        out_root.mkdir(parents=True, exist_ok=True)
        if pool_format == "json":
            pool_file = out_root / f"bench_pool_seed{seed}.jsonl"
            save_pool_jsonl(records, pool_file)
        else:
            pool_file = out_root / f"bench_pool_seed{seed}.flmp"
            save_pool_binary(records, pool_file)
        save_query(query, out_root / f"bench_query_seed{seed}.json")
        config = FlameConfig(shots_k=shots_k, seed=seed)
        start = time.perf_counter()
        result = run_flame(records, query, config, make_file_oracle(records))
        total = time.perf_counter() - start
        doc = {
            "ap_flame": result.report.average_precision,
            "ap_baseline": result.report.baseline_ap,
            "gain": result.report.average_precision - result.report.baseline_ap,
            "shots": result.shot_ids,
            "effective_k": result.effective_k,
            "post_labeling_seconds": result.post_labeling_seconds,
            "total_seconds": total,
            "pool_file": str(pool_file),
            "benchmark": spec.__dict__,
            "config": config.to_dict(),
        }
        out = Path(out_dir) / f"bench_seed{seed}.json"
        _write_json(out, doc)
        click.echo(json.dumps({"ap_flame": doc["ap_flame"],
                               "ap_baseline": doc["ap_baseline"],
                               "report": str(out)}))
    except Exception as exc:
        _fail(exc)


@main.command()
@click.option("--port", type=int, default=None, help="Overrides FLAME_PORT.")
@click.option("--assets", type=click.Path(), default=None,
              help="Crop/static asset directory; overrides FLAME_ASSETS.")
@click.option("--data", type=click.Path(), default=None,
              help="Session storage directory; overrides FLAME_DATA.")
def serve(port, assets, data):
    """Start the annotation HTTP service."""
    try:
        import uvicorn

        from .service import create_app

        port = port if port is not None else int(os.environ.get("FLAME_PORT", "8400"))
        assets = assets or os.environ.get("FLAME_ASSETS")
        data = data or os.environ.get("FLAME_DATA", "flame_sessions")
        app = create_app(data_dir=data, assets_dir=assets)
        uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")
    except Exception as exc:
        _fail(exc)


if __name__ == "__main__":
    main()
