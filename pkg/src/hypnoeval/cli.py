"""
Command-line front end.

Every subcommand takes one or more recording manifests (JSON), processes
them independently (optionally in parallel with ``--jobs``) and writes a
single report. Reports keep manifest order and use fixed float formatting,
so repeated runs on the same inputs produce identical bytes.
"""
from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .consensus import (
    build_consensus,
    dataset_reliability,
    inter_model_soft_agreement,
    soft_agreements,
    top_k_scorers,
)
from .core import Hypnodensity, mask_alignment
from .disagreement import (
    FEATURE_SETS,
    RecordingFeatures,
    consensus_disagreement_labels,
    epoch_features,
    first_principal_component,
    loro_auc,
    transition_proximity,
)
from .ensemble import channel_majority_vote, select_members, soft_vote
from .errors import (
    ConfigError,
    DegenerateCovariance,
    DegenerateLabels,
    EmptyConsensusSet,
    HypnoEvalError,
    IoError,
    NoEvaluableFolds,
    NoScoredEpochs,
    NoSleep,
    TooFewMembers,
    TooFewPairs,
    UndefinedConsensus,
)
from .gamlss import CovariateProfile, bundled_table, load_gamlss_table, predict
from .io import format_hypnodensity_csv, format_hypnogram_csv, load_bundle, read_manifest, write_report_json
from .markers import MARKER_FIELDS, derive_markers, marker_bias
from .metrics import acs, confusion, pooled, summary
from .stats import TestResult, consistency_deviation, holm_adjust, wilcoxon_one_sided

logger = logging.getLogger("hypnoeval")

# data-dependent conditions that turn into a skip entry instead of failing the run
SOFT_ERRORS = (
    NoScoredEpochs,
    NoSleep,
    TooFewPairs,
    DegenerateLabels,
    TooFewMembers,
    NoEvaluableFolds,
    UndefinedConsensus,
    EmptyConsensusSet,
    DegenerateCovariance,
)


def _run_parallel(func, items, jobs):
    """Apply ``func`` to every item, preserving input order."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(func, items))


def _load_manifests(paths):
    manifests = [read_manifest(p) for p in paths]
    ids = [m.recording_id for m in manifests]
    dup = sorted({i for i in ids if ids.count(i) > 1})
    if dup:
        raise ConfigError(f"duplicate recording ids: {', '.join(dup)}")
    return manifests


def _split_names(value):
    if value is None:
        return None
    names = [v.strip() for v in value.split(",") if v.strip()]
    if not names:
        raise ConfigError("empty name list")
    return names


def _parse_against(value):
    if value == "consensus":
        return "consensus", None
    if value.startswith("scorer:") and len(value) > len("scorer:"):
        return "scorer", value[len("scorer:"):]
    raise ConfigError(f"--against must be 'consensus' or 'scorer:NAME', got {value!r}")


def _check_reference(manifests, kind, name):
    for m in manifests:
        if kind == "consensus" and len(m.scorers) < 2:
            raise ConfigError(f"recording {m.recording_id!r}: consensus needs at least 2 scorers, "
                              f"manifest lists {len(m.scorers)}")
        if kind == "scorer" and name not in m.scorer_names:
            raise ConfigError(f"recording {m.recording_id!r} has no scorer {name!r}")


def _check_models(manifests, names):
    if names is None:
        return
    for m in manifests:
        unknown = [n for n in names if n not in m.model_names]
        if unknown:
            raise ConfigError(f"recording {m.recording_id!r} has no model(s) {', '.join(unknown)}")


def _skip(recording_id, exc):
    logger.warning("recording %s skipped: %s", recording_id, exc)
    return {"recording_id": recording_id, "skipped": f"{type(exc).__name__}: {exc}"}


def _consensus_set(bundles, k):
    """Dataset-level top-k scorers by mean per-recording soft-agreement."""
    tables = []
    for b in bundles:
        names = list(b.scorer_hypnograms)
        try:
            values = soft_agreements([b.scorer_hypnograms[n] for n in names])
        except NoScoredEpochs:
            continue
        tables.append(dict(zip(names, values.tolist())))
    reliability = dataset_reliability(tables)
    return top_k_scorers(reliability, k) if reliability else [], reliability


def _reference(bundle, kind, name, participants):
    """Reference hypnogram and hypnodensity for one recording."""
    if kind == "scorer":
        hyp = bundle.scorer_hypnograms[name]
        return hyp, Hypnodensity(_one_hot_or_uniform(hyp), hyp.epoch_duration_s), None
    chosen = [n for n in participants if n in bundle.scorer_hypnograms]
    if len(chosen) < 2:
        chosen = None
    result = build_consensus(bundle.scorer_hypnograms, participants=chosen)
    return result.consensus_hypnogram, result.soft_consensus, result


def _one_hot_or_uniform(hyp):
    probs = hyp.one_hot()
    probs[~hyp.scored] = 1.0 / probs.shape[1]
    return probs


def _predictions(bundle, model_names, ensemble_name):
    models = select_members(bundle.model_hypnodensities, model_names)
    names = model_names if model_names is not None else list(bundle.model_hypnodensities)
    out = dict(zip(names, models))
    if ensemble_name and len(models) >= 1:
        out[ensemble_name] = soft_vote(models)
    return out


# ----------------------------------------------------------------- ensemble

def cmd_ensemble(args):
    manifests = _load_manifests(args.manifests)
    members = _split_names(args.members)
    _check_models(manifests, members)
    for m in manifests:
        if not m.models:
            raise ConfigError(f"recording {m.recording_id!r} lists no models")
    if args.output is None:
        raise ConfigError("ensemble needs --output DIR for the generated files")
    outdir = Path(args.output)
    outdir.mkdir(parents=True, exist_ok=True)

    def work(manifest):
        bundle = load_bundle(manifest)
        chosen = select_members(bundle.model_hypnodensities, members)
        names = members or list(bundle.model_hypnodensities)
        if args.vote == "soft":
            density = soft_vote(chosen)
            hyp = density.argmax()
        else:
            density = None
            hyp = channel_majority_vote(chosen)
        entry = {"recording_id": manifest.recording_id, "members": names, "vote": args.vote,
                 "n_epochs": len(hyp)}
        stem = outdir / manifest.recording_id
        if density is not None:
            path = stem.with_name(f"{manifest.recording_id}.ensemble.hypnodensity.csv")
            path.write_text(format_hypnodensity_csv(density), encoding="utf-8")
            entry["hypnodensity"] = path.name
        path = stem.with_name(f"{manifest.recording_id}.ensemble.hypnogram.csv")
        path.write_text(format_hypnogram_csv(hyp), encoding="utf-8")
        entry["hypnogram"] = path.name
        return entry

    recordings = _run_parallel(work, manifests, args.jobs)
    report = {"command": "ensemble", "recordings": recordings}
    return report, recordings, outdir / "ensemble_report.json"


# ----------------------------------------------------------------- evaluate

def _evaluate_pair(ref_hyp, ref_density, pred_hyp, pred_density, absent):
    cm = confusion(ref_hyp, pred_hyp)
    scored = np.flatnonzero(ref_hyp.scored & pred_hyp.scored)
    out = summary(cm, absent)
    out["acs"] = acs(pred_density, ref_density, scored)
    return out, cm


def cmd_evaluate(args):
    manifests = _load_manifests(args.manifests)
    kind, name = _parse_against(args.against)
    _check_reference(manifests, kind, name)
    models = _split_names(args.models)
    _check_models(manifests, models)
    bundles = _run_parallel(load_bundle, manifests, args.jobs)

    participants, reliability = [], {}
    if kind == "consensus":
        participants, reliability = _consensus_set(bundles, args.top_k)

    def work(bundle):
        try:
            ref_hyp, ref_density, cons = _reference(bundle, kind, name, participants)
            entry = {"recording_id": bundle.recording_id, "n_epochs": bundle.n_epochs,
                     "n_reference_epochs": int(ref_hyp.scored.sum())}
            cms, weights, preds = {}, {}, {}
            for pname, density in _predictions(bundle, models, args.ensemble).items():
                metrics, cm = _evaluate_pair(ref_hyp, ref_density, density.argmax(), density, args.absent)
                preds[pname], cms[pname], weights[pname] = metrics, cm, metrics["acs"] * cm.total
            entry["predictions"] = preds
            if cons is not None:
                entry["consensus_participants"] = cons.participants
                entry["soft_agreement"] = cons.per_scorer_soft_agreement
                entry["reliability_ranking"] = cons.reliability_ranking
                scorers = {}
                for sname, hyp in bundle.scorer_hypnograms.items():
                    loo = build_consensus(bundle.scorer_hypnograms, exclude=sname)
                    if len(loo.participants) < 2:
                        continue
                    own = Hypnodensity(_one_hot_or_uniform(hyp), hyp.epoch_duration_s)
                    try:
                        scorers[sname], _ = _evaluate_pair(loo.consensus_hypnogram, loo.soft_consensus,
                                                           hyp, own, args.absent)
                    except NoScoredEpochs as exc:
                        scorers[sname] = {"skipped": str(exc)}
                entry["scorers"] = scorers
            argmaxes = {n: d.argmax() for n, d in bundle.model_hypnodensities.items()
                        if models is None or n in models}
            if len(argmaxes) >= 2:
                entry["inter_model_soft_agreement"] = inter_model_soft_agreement(argmaxes)
            return entry, cms, weights
        except SOFT_ERRORS as exc:
            return _skip(bundle.recording_id, exc), {}, {}

    results = _run_parallel(work, bundles, args.jobs)
    recordings = [r[0] for r in results]
    pooled_out = {}
    names = []
    for _, cms, _ in results:
        names += [n for n in cms if n not in names]
    for pname in names:
        mats = [r[1][pname] for r in results if pname in r[1]]
        cm = pooled(mats)
        entry = summary(cm, args.absent)
        entry["acs"] = sum(r[2][pname] for r in results if pname in r[2]) / cm.total
        entry["n_recordings"] = len(mats)
        pooled_out[pname] = entry
    report = {"command": "evaluate", "against": args.against, "absent": args.absent,
              "recordings": recordings, "pooled": pooled_out}
    if kind == "consensus":
        report["consensus_set"] = participants
        report["dataset_reliability"] = reliability
    rows = []
    for rec in recordings:
        for pname, m in rec.get("predictions", {}).items():
            rows.append(_metric_row(rec["recording_id"], pname, m))
    for pname, m in pooled_out.items():
        rows.append(_metric_row("POOLED", pname, m))
    return report, rows, None


def _metric_row(rid, pname, m):
    row = {"recording_id": rid, "predictor": pname}
    for k in ("accuracy", "mf1", "kappa", "acs"):
        row[k] = m.get(k)
    for stage, v in m.get("class_f1", {}).items():
        row[f"f1_{stage}"] = v
    return row


# ------------------------------------------------------------------ markers

def cmd_markers(args):
    manifests = _load_manifests(args.manifests)
    kind, name = (None, None) if args.reference == "none" else _parse_against(args.reference)
    if kind is not None:
        _check_reference(manifests, kind, name)
    models = _split_names(args.models)
    _check_models(manifests, models)
    bundles = _run_parallel(load_bundle, manifests, args.jobs)
    participants = _consensus_set(bundles, args.top_k)[0] if kind == "consensus" else []

    def markers_or_none(hyp):
        try:
            return derive_markers(hyp, args.rate_denominator)
        except (NoSleep, NoScoredEpochs) as exc:
            return exc

    def work(bundle):
        entry = {"recording_id": bundle.recording_id}
        hyps = {f"scorer:{n}": h for n, h in bundle.scorer_hypnograms.items()}
        for pname, density in _predictions(bundle, models, args.ensemble).items():
            hyps[f"model:{pname}"] = density.argmax()
        ref = None
        if kind is not None:
            try:
                ref_hyp = _reference(bundle, kind, name, participants)[0]
                hyps["reference"] = ref_hyp
            except SOFT_ERRORS as exc:
                return _skip(bundle.recording_id, exc)
        markers, warnings = {}, []
        for hname, hyp in hyps.items():
            rep = markers_or_none(hyp)
            if isinstance(rep, Exception):
                markers[hname] = None
                warnings.append(f"{hname}: {type(rep).__name__}: {rep}")
            else:
                markers[hname] = rep.as_dict()
        entry["markers"] = markers
        if kind is not None:
            ref = markers_or_none(hyps["reference"])
            if not isinstance(ref, Exception):
                bias = {}
                for hname in hyps:
                    if hname.startswith("model:") and markers[hname] is not None:
                        bias[hname[len("model:"):]] = marker_bias(markers_or_none(hyps[hname]), ref)
                entry["bias"] = bias
        if warnings:
            entry["warnings"] = warnings
        return entry

    recordings = _run_parallel(work, bundles, args.jobs)
    report = {"command": "markers", "reference": args.reference,
              "rate_denominator": args.rate_denominator, "recordings": recordings}
    rows = []
    for rec in recordings:
        for hname, m in rec.get("markers", {}).items():
            row = {"recording_id": rec["recording_id"], "hypnogram": hname}
            row.update({f: (None if m is None else m[f]) for f in MARKER_FIELDS})
            bias = rec.get("bias", {}).get(hname[len("model:"):]) if hname.startswith("model:") else None
            row.update({f"bias_{f}": (None if bias is None else bias[f]) for f in MARKER_FIELDS})
            rows.append(row)
    return report, rows, None


# ----------------------------------------------------------------- disagree

def cmd_disagree(args):
    manifests = _load_manifests(args.manifests)
    models = _split_names(args.models)
    _check_models(manifests, models)
    for m in manifests:
        if len(m.scorers) < 2:
            raise ConfigError(f"recording {m.recording_id!r}: need at least 2 scorers")
        if len(models or m.models) < 2:
            raise ConfigError(f"recording {m.recording_id!r}: need at least 2 models")
    bundles = _run_parallel(load_bundle, manifests, args.jobs)
    if args.features_dir:
        Path(args.features_dir).mkdir(parents=True, exist_ok=True)

    def work(bundle):
        try:
            epochs = mask_alignment(bundle)
            members = select_members(bundle.model_hypnodensities, models)
            feats = epoch_features(members)
            scorers = list(bundle.scorer_hypnograms.values())
            labels = consensus_disagreement_labels(scorers)
            near = transition_proximity(build_consensus(bundle.scorer_hypnograms).consensus_hypnogram,
                                        args.window_s)
        except SOFT_ERRORS as exc:
            return _skip(bundle.recording_id, exc), None
        sub = type(feats)(*(getattr(feats, f)[epochs] for f in ("entropy", "d_mean", "d_std", "d_max")))
        if args.features_dir:
            _write_features(Path(args.features_dir) / f"{bundle.recording_id}.features.csv",
                            epochs, sub, labels[epochs], near[epochs])
        entry = {"recording_id": bundle.recording_id, "n_epochs": int(epochs.size),
                 "disagreement_rate": float(labels[epochs].mean()),
                 "near_transition_rate": float(near[epochs].mean())}
        return entry, (RecordingFeatures(bundle.recording_id, sub, labels[epochs]), near[epochs])

    results = _run_parallel(work, bundles, args.jobs)
    recordings = [r[0] for r in results]
    usable = [r[1] for r in results if r[1] is not None]
    report = {"command": "disagree", "window_s": args.window_s, "lam": args.lam,
              "recordings": recordings, "feature_sets": {}}
    rows = []
    for fset in FEATURE_SETS:
        try:
            res = loro_auc([u[0] for u in usable], fset, lam=args.lam)
        except NoEvaluableFolds as exc:
            logger.warning("feature set %s: %s", fset, exc)
            report["feature_sets"][fset] = {"skipped": str(exc)}
            continue
        report["feature_sets"][fset] = {"mean_auc": res.mean_auc, "per_recording": res.per_recording,
                                        "skipped": res.skipped}
        rows += [{"feature_set": fset, "recording_id": rid, "auc": auc}
                 for rid, auc in res.per_recording.items()]
        rows.append({"feature_set": fset, "recording_id": "MEAN", "auc": res.mean_auc})
    if usable:
        report["strata"] = _strata(usable)
    return report, rows, None


def _strata(usable):
    """Mean entropy and first principal component of distance stats per (agreement, proximity) cell."""
    entropy = np.concatenate([u[0].features.entropy for u in usable])
    dist = np.concatenate([u[0].features.distance_matrix() for u in usable])
    labels = np.concatenate([u[0].labels for u in usable])
    near = np.concatenate([u[1] for u in usable])
    try:
        pc1 = first_principal_component(dist)
    except DegenerateCovariance:
        pc1 = np.zeros(len(dist))
    out = {}
    for lab, lab_name in ((0, "agreement"), (1, "disagreement")):
        for nr, nr_name in ((1, "near"), (0, "not_near")):
            sel = (labels == lab) & (near == nr)
            key = f"{lab_name}/{nr_name}"
            out[key] = {"n_epochs": int(sel.sum()),
                        "mean_entropy": float(entropy[sel].mean()) if sel.any() else None,
                        "mean_pc1": float(pc1[sel].mean()) if sel.any() else None}
    return out


def _write_features(path, epochs, feats, labels, near):
    buf = io.StringIO()
    buf.write("epoch,entropy,d_mean,d_std,d_max,label,near_transition\n")
    for k, t in enumerate(epochs):
        buf.write(f"{t},{feats.entropy[k]:.6g},{feats.d_mean[k]:.6g},{feats.d_std[k]:.6g},"
                  f"{feats.d_max[k]:.6g},{labels[k]},{near[k]}\n")
    path.write_text(buf.getvalue(), encoding="utf-8")


# -------------------------------------------------------------------- stats

def _read_metric_csv(path):
    try:
        text = Path(path).read_text(encoding="utf-8-sig")
    except FileNotFoundError:
        raise IoError(path) from None
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise ConfigError(f"{path}: empty metric table") from None
    if len(header) < 3:
        raise ConfigError(f"{path}: need a recording column and at least two method columns")
    methods = header[1:]
    columns = {m: [] for m in methods}
    for lineno, row in enumerate(reader, start=2):
        if not any(c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise ConfigError(f"{path}: line {lineno}: expected {len(header)} fields")
        for m, cell in zip(methods, row[1:]):
            try:
                columns[m].append(float(cell) if cell.strip() else np.nan)
            except ValueError:
                raise ConfigError(f"{path}: line {lineno}: {cell!r} is not a number") from None
    return {m: np.array(v) for m, v in columns.items()}


def cmd_stats(args):
    tables = []
    for path in args.tables:
        columns = _read_metric_csv(path)
        baseline = args.baseline or next(iter(columns))
        if baseline not in columns:
            raise ConfigError(f"{path}: no column {baseline!r}")
        tables.append((path, columns, baseline))

    comparisons, warnings = [], []
    tests = []
    for path, columns, baseline in tables:
        label = Path(path).stem
        for cand, values in columns.items():
            if cand == baseline:
                continue
            ok = ~(np.isnan(values) | np.isnan(columns[baseline]))
            a, b = values[ok], columns[baseline][ok]
            if args.consistency:
                # smaller deviation from the median is better
                a, b = np.array(consistency_deviation(a)), np.array(consistency_deviation(b))
                alternative = "less"
            else:
                alternative = args.alternative
            tests.append((label, cand, baseline, a, b, alternative))

    # Holm adjustment runs over every comparison of the invocation
    results = []
    for label, cand, baseline, a, b, alternative in tests:
        try:
            results.append(wilcoxon_one_sided(a, b, alternative))
        except TooFewPairs as exc:
            results.append(str(exc))
    tested = [i for i, r in enumerate(results) if isinstance(r, TestResult)]
    adjusted = dict(zip(tested, holm_adjust([results[i].p_raw for i in tested])))
    for i, (label, cand, baseline, a, b, alternative) in enumerate(tests):
        r = results[i]
        entry = {"table": label, "candidate": cand, "baseline": baseline, "alternative": alternative,
                 "n_pairs": int(a.size)}
        if isinstance(r, TestResult):
            entry.update({"statistic": r.statistic, "z": r.z, "p_raw": r.p_raw, "p_adjusted": adjusted[i],
                          "effect_r": r.effect_r, "n_effective": r.n_effective, "method": r.method,
                          "median_difference": float(np.median(a - b))})
        else:
            entry["skipped"] = r
            warnings.append(f"{label}:{cand}: {r}")
            logger.warning("comparison %s:%s skipped: %s", label, cand, r)
        comparisons.append(entry)
    rows = comparisons
    report = {"command": "stats", "mode": "consistency" if args.consistency else "median",
              "comparisons": comparisons}
    if warnings:
        report["warnings"] = warnings
    return report, rows, None


# ------------------------------------------------------------ gamlss-predict

def cmd_gamlss_predict(args):
    if args.table:
        try:
            text = Path(args.table).read_bytes()
        except FileNotFoundError:
            raise IoError(args.table) from None
        specs = load_gamlss_table(text, model=args.model)
    else:
        specs = bundled_table(args.model or "E")
    offsets = {}
    if args.age_offset_mu is not None:
        offsets["mu"] = args.age_offset_mu
    if args.age_offset_sigma is not None:
        offsets["sigma"] = args.age_offset_sigma
    profile = CovariateProfile.from_clinical(args.gender, args.ahi, args.plmi,
                                             age_spline_contribution=offsets)
    outcomes = list(specs) if args.outcome == "all" else [args.outcome]
    missing = [o for o in outcomes if o not in specs]
    if missing:
        raise ConfigError(f"unknown outcome(s) {', '.join(missing)}; table has {', '.join(specs)}")
    predictions = [predict(specs[o], profile) for o in outcomes]
    report = {"command": "gamlss-predict", "model": args.model or ("E" if not args.table else None),
              "profile": {"gender": args.gender, "ahi": args.ahi, "plmi": args.plmi,
                          "age_offsets": offsets},
              "predictions": predictions}
    if report["model"] is None:
        del report["model"]
    rows = [{"outcome": p["outcome"], "family": p["family"], "expected": p["expected"],
             **{f"param_{k}": v for k, v in p["parameters"].items()}} for p in predictions]
    return report, rows, None


# --------------------------------------------------------------------- main

def _csv_text(rows):
    fields = []
    for row in rows:
        fields += [k for k in row if k not in fields and not isinstance(row[k], (dict, list))]
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: _cell(row.get(k)) for k in fields})
    return buf.getvalue()


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.6g}"
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--output", "-o", help="report path (directory for 'ensemble'); stdout if omitted")
    common.add_argument("--jobs", "-j", type=int, default=os.cpu_count() or 1,
                        help="recordings processed in parallel (default: all cores)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--verbose", "-v", action="store_true")

    parser = argparse.ArgumentParser(prog="hypnoeval", description=__doc__.strip().splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ensemble", parents=[common], help="soft-vote model hypnodensities")
    p.add_argument("manifests", nargs="+")
    p.add_argument("--members", help="comma-separated model names (default: every model)")
    p.add_argument("--vote", choices=("soft", "majority"), default="soft",
                   help="soft: average probabilities; majority: vote on per-member argmax labels")
    p.set_defaults(func=cmd_ensemble)

    def add_reference(p):
        p.add_argument("--models", help="comma-separated model names (default: every model)")
        p.add_argument("--ensemble", metavar="NAME", nargs="?", const="ensemble", default=None,
                       help="also evaluate the soft-vote of the selected models under NAME")
        p.add_argument("--top-k", type=int, default=4,
                       help="size of the most-reliable scorer set used as consensus (default 4)")

    p = sub.add_parser("evaluate", parents=[common], help="agreement metrics against a reference")
    p.add_argument("manifests", nargs="+")
    p.add_argument("--against", default="consensus", help="'consensus' or 'scorer:NAME'")
    p.add_argument("--absent", choices=("exclude", "zero"), default="exclude",
                   help="macro-F1 treatment of stages absent from both hypnograms")
    add_reference(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("markers", parents=[common], help="clinical sleep markers and marker bias")
    p.add_argument("manifests", nargs="+")
    p.add_argument("--reference", default="consensus", help="'consensus', 'scorer:NAME' or 'none'")
    p.add_argument("--rate-denominator", choices=("tst", "tib"), default="tst")
    add_reference(p)
    p.set_defaults(func=cmd_markers)

    p = sub.add_parser("disagree", parents=[common], help="predict scorer disagreement from ensemble variability")
    p.add_argument("manifests", nargs="+")
    p.add_argument("--models", help="comma-separated ensemble members (default: every model)")
    p.add_argument("--window-s", type=float, default=60.0, help="transition proximity window in seconds")
    p.add_argument("--lam", type=float, default=1e-4, help="ridge strength of the logistic model")
    p.add_argument("--features-dir", help="write per-recording feature CSVs here")
    p.set_defaults(func=cmd_disagree)

    p = sub.add_parser("stats", parents=[common], help="one-sided Wilcoxon tests with Holm correction")
    p.add_argument("tables", nargs="+", help="CSV: recording column followed by one column per method")
    p.add_argument("--baseline", help="column every other column is compared with (default: first)")
    p.add_argument("--alternative", choices=("greater", "less"), default="greater",
                   help="direction tested for candidate versus baseline")
    p.add_argument("--consistency", action="store_true",
                   help="compare absolute deviations from the median instead of raw values")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("gamlss-predict", parents=[common], help="expected value of a GAMLSS bias model")
    p.add_argument("--table", help="coefficient CSV (default: bundled ensemble tables)")
    p.add_argument("--model", help="model column value to select (bundled: E, E1, E2, E3)")
    p.add_argument("--outcome", required=True, help="outcome name, e.g. MF1 or TST, or 'all'")
    p.add_argument("--gender", choices=("female", "male"), default="female")
    p.add_argument("--ahi", type=float, default=0.0, help="apnea-hypopnea index, events/hour")
    p.add_argument("--plmi", type=float, default=0.0, help="periodic limb movement index, events/hour")
    p.add_argument("--age-offset-mu", type=float, help="age spline contribution to the mu predictor")
    p.add_argument("--age-offset-sigma", type=float, help="age spline contribution to the sigma predictor")
    p.set_defaults(func=cmd_gamlss_predict)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s", stream=sys.stderr)
    if args.jobs < 1:
        parser.error("--jobs must be at least 1")
    try:
        report, rows, default_path = args.func(args)
    except HypnoEvalError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    if args.format == "csv":
        data = _csv_text(rows).encode("utf-8")
        if default_path is not None:
            default_path = default_path.with_suffix(".csv")
    else:
        data = write_report_json(report)
    target = default_path if default_path is not None else args.output
    if target is None:
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        Path(target).write_bytes(data)
    return 0


if __name__ == "__main__":
    sys.exit(main())
