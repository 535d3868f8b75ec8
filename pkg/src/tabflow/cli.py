"""Pipeline command-line interface.

Subcommands: synthdata, render, train, transfer, eval, stats. Global flags
--config/--seed/--workdir. Exit codes: 0 success, 1 usage, 2 data error,
3 numeric failure. Every written artifact embeds the config hash (WAV comment
chunk, CSV comment line, checkpoint config echo).
"""

from __future__ import annotations

import argparse
import csv
import itertools
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import audiodist, flowmatch, latentcodec, mosstats, wavio
from . import neuralnet as nn
from .config import PipelineConfig, load_config
from .errors import DataError, NumericError, UsageError
from .fixtures import toy_corpus
from .stringsynth import (STYLE_PRESETS, AudioBuffer, amp_process,
                          normalize_rms, render)
from .tabscore import parse_score, serialize_score

SOURCE_STYLE = "synthetic"
TARGET_STYLE = "pseudo_real"


def _resolve(cfg: PipelineConfig, p: Path) -> Path:
    return p if p.is_absolute() else cfg.workdir / p


def _scores_dir(cfg) -> Path:
    return _resolve(cfg, cfg.scores_dir)


def _audio_dir(cfg, style: str) -> Path:
    return _resolve(cfg, cfg.audio_dir) / style


def _pmap(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _load_audio(path: Path) -> AudioBuffer:
    samples, rate = wavio.read_wav(path)
    return AudioBuffer(samples, rate)


# ---------------------------------------------------------------- synthdata

def cmd_synthdata(cfg: PipelineConfig, n_scores: int | None = None) -> list[str]:
    """Generate scores and render both styles; returns the stems written."""
    n = cfg.n_scores if n_scores is None else n_scores
    if n < 1:
        raise DataError(f"need at least one score, got {n}")
    scores_dir = _scores_dir(cfg)
    scores_dir.mkdir(parents=True, exist_ok=True)
    for style in (SOURCE_STYLE, TARGET_STYLE):
        _audio_dir(cfg, style).mkdir(parents=True, exist_ok=True)

    stems = []
    scores = toy_corpus(n, seed=cfg.seed, target_seconds=cfg.score_seconds)
    for i, score in enumerate(scores):
        stem = f"score_{i:03d}"
        (scores_dir / f"{stem}.gftab").write_text(serialize_score(score))
        for style in (SOURCE_STYLE, TARGET_STYLE):
            audio = render(score, STYLE_PRESETS[style], cfg.sample_rate)
            wavio.write_wav(_audio_dir(cfg, style) / f"{stem}.wav", audio.samples,
                            audio.sample_rate, comment=f"cfg={cfg.hash()}")
        stems.append(stem)
    return stems


# ------------------------------------------------------------------- render

def cmd_render(cfg: PipelineConfig, style: str) -> list[Path]:
    """Render every score in the scores dir with one style preset."""
    if style not in STYLE_PRESETS:
        raise UsageError(f"unknown style {style!r}; presets: {sorted(STYLE_PRESETS)}")
    scores_dir = _scores_dir(cfg)
    if not scores_dir.is_dir():
        raise DataError(f"scores directory not found: {scores_dir}")
    paths = sorted(scores_dir.glob("*.gftab"))
    if not paths:
        raise DataError(f"no .gftab scores in {scores_dir}")
    out_dir = _audio_dir(cfg, style)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for path in paths:
        score = parse_score(path.read_text())
        audio = render(score, STYLE_PRESETS[style], cfg.sample_rate)
        out = out_dir / f"{path.stem}.wav"
        wavio.write_wav(out, audio.samples, audio.sample_rate, comment=f"cfg={cfg.hash()}")
        written.append(out)
    return written


# -------------------------------------------------------------------- train

def _encode_cached(cfg: PipelineConfig, style: str, stem: str) -> list[latentcodec.LatentSeq]:
    wav = _audio_dir(cfg, style) / f"{stem}.wav"
    if not wav.is_file():
        raise DataError(f"missing audio file {wav}")
    audio = _load_audio(wav)
    n_chunks = max(1, -(-len(audio.samples) // int(round(cfg.chunk_seconds * audio.sample_rate))))
    cache_dir = cfg.workdir / "cache" / style
    cache_dir.mkdir(parents=True, exist_ok=True)
    paths = [cache_dir / f"{stem}.chunk{k}.lat" for k in range(n_chunks)]
    if all(p.is_file() for p in paths):
        latents = [latentcodec.load_latent(p) for p in paths]
        if all(l.dims == cfg.dims for l in latents):
            return latents
    latents = [latentcodec.encode(c, cfg.dims) for c in
               latentcodec.chunk(audio, cfg.chunk_seconds)]
    for p, lat in zip(paths, latents):
        latentcodec.save_latent(p, lat)
    return latents


def _train_test_split(cfg: PipelineConfig, stems: list[str]) -> tuple[list[str], list[str]]:
    order = list(np.random.default_rng(cfg.seed).permutation(len(stems)))
    n_train = max(1, int(round(cfg.train_split * len(stems))))
    train = sorted(stems[i] for i in order[:n_train])
    test = sorted(stems[i] for i in order[n_train:])
    return train, test


def cmd_train(cfg: PipelineConfig, out_checkpoint: Path | None = None):
    """Chunk, encode, and train; writes checkpoint plus loss history CSV."""
    src_dir = _audio_dir(cfg, SOURCE_STYLE)
    tgt_dir = _audio_dir(cfg, TARGET_STYLE)
    for d in (src_dir, tgt_dir):
        if not d.is_dir():
            raise DataError(f"audio directory not found: {d}")
    stems = sorted(p.stem for p in src_dir.glob("*.wav"))
    if not stems:
        raise DataError(f"no paired audio found under {src_dir}")
    missing = [s for s in stems if not (tgt_dir / f"{s}.wav").is_file()]
    if missing:
        raise DataError(f"stems missing in {tgt_dir}: {', '.join(missing)}")

    train_stems, test_stems = _train_test_split(cfg, stems)
    src_latents = _pmap(lambda s: _encode_cached(cfg, SOURCE_STYLE, s), train_stems,
                        cfg.workers)
    tgt_latents = _pmap(lambda s: _encode_cached(cfg, TARGET_STYLE, s), train_stems,
                        cfg.workers)
    pairs = []
    for stem, src, tgt in zip(train_stems, src_latents, tgt_latents):
        if len(src) != len(tgt):
            raise DataError(f"chunk count mismatch for {stem}: {len(src)} vs {len(tgt)}")
        pairs.extend(latentcodec.ChunkPair(a, b) for a, b in zip(src, tgt))

    t0 = time.perf_counter()
    state = nn.AdamState(lr=cfg.lr)
    net, history = flowmatch.train(pairs, cfg.train_config(), state=state)
    elapsed = time.perf_counter() - t0

    cfg.workdir.mkdir(parents=True, exist_ok=True)
    ckpt = out_checkpoint or cfg.workdir / "model.ckpt"
    echo = {"config_hash": cfg.hash(), "dims": cfg.dims,
            "base_channels": cfg.base_channels, "seed": cfg.seed,
            "input_gain": net.input_gain,
            "train_stems": train_stems, "test_stems": test_stems,
            "config": cfg.raw}
    nn.save_checkpoint(ckpt, net.params, state, echo)

    loss_csv = cfg.workdir / "loss_history.csv"
    with open(loss_csv, "w", newline="") as fh:
        fh.write(f"# config {cfg.hash()}\n")
        writer = csv.writer(fh)
        writer.writerow(["step", "epoch", "loss"])
        for step, epoch, loss in history:
            writer.writerow([step, epoch, repr(loss)])

    steps = len(history)
    rate = steps / elapsed if elapsed > 0 else float("inf")
    print(f"trained {steps} steps in {elapsed:.1f} s ({rate:.2f} steps/s); "
          f"checkpoint: {ckpt}")
    return ckpt, history


# ----------------------------------------------------------------- transfer

def _load_net(checkpoint: Path) -> tuple[nn.VelocityNet, dict]:
    params, _, echo = nn.load_checkpoint(checkpoint)
    dims = int(echo.get("dims", 64))
    base = int(echo.get("base_channels", 32))
    net = nn.VelocityNet(dims, base_channels=base, seed=int(echo.get("seed", 0)),
                         input_gain=float(echo.get("input_gain", 1.0)))
    for name, arr in params.items():
        if name not in net.params:
            raise DataError(f"checkpoint parameter {name} not in model")
        if net.params[name].data.shape != arr.shape:
            raise DataError(f"checkpoint shape mismatch for {name}: "
                            f"{arr.shape} vs {net.params[name].data.shape}")
        net.params[name].data[...] = arr
    return net, echo


def cmd_transfer(cfg: PipelineConfig, checkpoint: Path, input_path: Path,
                 output_path: Path) -> Path:
    """Encode, transport each chunk through the flow ODE, decode, write WAV."""
    checkpoint = Path(checkpoint)
    input_path = Path(input_path)
    if not checkpoint.is_file():
        raise DataError(f"checkpoint not found: {checkpoint}")
    net, echo = _load_net(checkpoint)
    if net.dims != cfg.dims:
        raise DataError(f"checkpoint dims {net.dims} do not match config dims {cfg.dims}")

    if input_path.suffix == ".gftab":
        audio = render(parse_score(input_path.read_text()),
                       STYLE_PRESETS[SOURCE_STYLE], cfg.sample_rate)
    else:
        audio = _load_audio(input_path)

    chunk_samples = int(round(cfg.chunk_seconds * audio.sample_rate))
    chunks = latentcodec.chunk(audio, cfg.chunk_seconds)
    # full-band analysis; the flow transports the first cfg.dims coefficients
    # and, unless disabled, the remaining bands pass through from the source
    full = [latentcodec.encode(c, 1024) for c in chunks]
    states = np.stack([l.frames.T[:cfg.dims] for l in full])
    moved = flowmatch.transfer_batch(net, states, cfg.solver())

    pieces = []
    for k in range(moved.shape[0]):
        if cfg.residual_high_bands:
            frames = full[k].frames.copy()
            frames[:, :cfg.dims] = moved[k].T
            lat = latentcodec.LatentSeq(frames, sample_rate=audio.sample_rate)
        else:
            lat = latentcodec.LatentSeq(moved[k].T, sample_rate=audio.sample_rate)
        decoded = latentcodec.decode(lat).samples
        padded = np.zeros(chunk_samples, dtype=decoded.dtype)
        padded[:len(decoded)] = decoded
        pieces.append(AudioBuffer(padded, audio.sample_rate))
    out = latentcodec.dechunk(pieces, len(audio.samples))

    output_path = Path(output_path)
    output_path.parent.mkdir(parents=True, exist_ok=True)
    wavio.write_wav(output_path, out.samples, out.sample_rate, comment=f"cfg={cfg.hash()}")
    return output_path


# --------------------------------------------------------------------- eval

_CONDITIONS = ("di", "amp")
_SYSTEMS = ("render", "guitarflow")


def _condition_audio(cfg: PipelineConfig, audio: AudioBuffer, condition: str) -> AudioBuffer:
    if condition == "di":
        return audio
    if condition == "amp":
        normalized = normalize_rms(audio, cfg.normalize_db)
        return amp_process(normalized, cfg.amp_drive, cfg.amp_tone_cutoff)
    raise UsageError(f"unknown condition {condition!r}")


def _subsample(e: audiodist.EmbeddingSet, limit: int, seed_key: int) -> audiodist.EmbeddingSet:
    if len(e) <= limit:
        return e
    rng = np.random.default_rng([seed_key, limit])
    idx = np.sort(rng.choice(len(e), size=limit, replace=False))
    return audiodist.EmbeddingSet(e.vectors[idx], e.source_label)


def cmd_eval(cfg: PipelineConfig, real_dir: Path, render_dir: Path,
             guitarflow_dir: Path, conditions=("di", "amp")):
    """FAD/KAD/reconstruction metrics of both systems against the real corpus."""
    dirs = {"real": Path(real_dir), "render": Path(render_dir),
            "guitarflow": Path(guitarflow_dir)}
    for label, d in dirs.items():
        if not d.is_dir():
            raise DataError(f"{label} directory not found: {d}")
    stems = sorted(p.stem for p in dirs["real"].glob("*.wav"))
    if not stems:
        raise DataError(f"no WAV files in {dirs['real']}")
    for label, d in dirs.items():
        missing = [s for s in stems if not (d / f"{s}.wav").is_file()]
        if missing:
            raise DataError(f"stems missing in {label} dir {d}: {', '.join(missing)}")

    rows = []  # (condition, metric, system, value)
    for condition in conditions:
        if condition not in _CONDITIONS:
            raise UsageError(f"unknown condition {condition!r}")
        per_stem: dict[str, dict[str, audiodist.EmbeddingSet]] = {}
        for label, d in dirs.items():
            def one(stem, d=d, label=label):
                audio = _condition_audio(cfg, _load_audio(d / f"{stem}.wav"), condition)
                return audiodist.embed(audio, source_label=f"{label}/{stem}")
            embeds = _pmap(one, stems, cfg.workers)
            per_stem[label] = dict(zip(stems, embeds))

        pooled = {label: audiodist.EmbeddingSet(
            np.vstack([per_stem[label][s].vectors for s in stems]), label)
            for label in dirs}
        for j, system in enumerate(_SYSTEMS):
            rows.append((condition, "fad", system,
                         audiodist.fad(pooled["real"], pooled[system])))
            kad_val = audiodist.kad(
                _subsample(pooled["real"], cfg.kad_max_frames, cfg.seed),
                _subsample(pooled[system], cfg.kad_max_frames, cfg.seed + 1 + j))
            rows.append((condition, "kad", system, kad_val))
        for system in _SYSTEMS:
            diffs = [np.linalg.norm(per_stem["real"][s].vectors
                                    - _aligned(per_stem[system][s], per_stem["real"][s], s).vectors,
                                    axis=1) for s in stems]
            rows.append((condition, "recon", system, float(np.mean(np.concatenate(diffs)))))

    cfg.workdir.mkdir(parents=True, exist_ok=True)
    out_csv = cfg.workdir / "metrics.csv"
    with open(out_csv, "w", newline="") as fh:
        fh.write(f"# config {cfg.hash()}\n")
        writer = csv.writer(fh)
        writer.writerow(["condition", "metric", "system", "value"])
        for row in rows:
            writer.writerow([row[0], row[1], row[2], repr(row[3])])

    print(f"{'condition':<10} {'metric':<7} {'render':>14} {'guitarflow':>14}")
    table = {(c, m): {} for c, m, _, _ in rows}
    for c, m, s, v in rows:
        table[(c, m)][s] = v
    for (c, m), vals in table.items():
        print(f"{c:<10} {m:<7} {vals['render']:>14.6f} {vals['guitarflow']:>14.6f}")
    return rows


def _aligned(e: audiodist.EmbeddingSet, ref: audiodist.EmbeddingSet,
             stem: str) -> audiodist.EmbeddingSet:
    if e.vectors.shape != ref.vectors.shape:
        raise DataError(f"stem {stem}: embeddings not frame-aligned "
                        f"({e.vectors.shape} vs {ref.vectors.shape})")
    return e


# -------------------------------------------------------------------- stats

def cmd_stats(cfg: PipelineConfig, ratings_csv: Path, m: int, alpha: float = 0.05):
    """Friedman + pairwise Wilcoxon at the Bonferroni-corrected threshold."""
    ratings_csv = Path(ratings_csv)
    if not ratings_csv.is_file():
        raise DataError(f"ratings file not found: {ratings_csv}")
    with open(ratings_csv, newline="") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        if reader.fieldnames is None:
            raise DataError(f"{ratings_csv}: empty ratings CSV")
        required = {"rater", "item", "system", "score"}
        if not required.issubset(set(reader.fieldnames)):
            raise DataError(f"{ratings_csv}: header must contain {sorted(required)}")
        has_condition = "condition" in reader.fieldnames
        by_condition: dict[str, list] = {}
        for row in reader:
            cond = row["condition"] if has_condition else "all"
            by_condition.setdefault(cond, []).append(
                (row["rater"], row["item"], row["system"], float(row["score"])))
    if not by_condition:
        raise DataError(f"{ratings_csv}: no rating rows")

    alpha_corr = mosstats.bonferroni(alpha, m)
    results = []  # (condition, comparison, TestResult)
    mos_lines = [f"# config {cfg.hash()}", "# quartiles: inclusive (Tukey hinges)",
                 "condition,system,mean,median,q1,q3,min,max,n"]
    for cond in sorted(by_condition):
        table = mosstats.RatingTable.from_rows(by_condition[cond])
        results.append((cond, "all-systems", mosstats.friedman(table)))
        for a, b in itertools.combinations(table.systems, 2):
            res = mosstats.wilcoxon_signed_rank(table.column(a), table.column(b))
            res = mosstats.TestResult(res.statistic, res.p_value, res.method,
                                      df=res.df, alpha_corrected=alpha_corr,
                                      zeros_dropped=res.zeros_dropped)
            results.append((cond, f"{a}-vs-{b}", res))
        for system, row in mosstats.mos_summary(table).items():
            mos_lines.append(f"{cond},{system},{row['mean']},{row['median']},"
                             f"{row['q1']},{row['q3']},{row['min']},{row['max']},"
                             f"{int(row['n'])}")

    cfg.workdir.mkdir(parents=True, exist_ok=True)
    tests_csv = cfg.workdir / "stats_tests.csv"
    with open(tests_csv, "w", newline="") as fh:
        fh.write(f"# config {cfg.hash()}\n")
        writer = csv.writer(fh)
        writer.writerow(["condition", "comparison", "method", "statistic", "df",
                         "p_value", "alpha_corrected", "zeros_dropped", "significant"])
        for cond, comp, r in results:
            threshold = r.alpha_corrected if r.alpha_corrected is not None else alpha
            writer.writerow([cond, comp, r.method, repr(r.statistic),
                             "" if r.df is None else r.df, repr(r.p_value),
                             "" if r.alpha_corrected is None else f"{r.alpha_corrected:.4f}",
                             r.zeros_dropped, str(r.p_value < threshold).lower()])
    (cfg.workdir / "mos_summary.csv").write_text("\n".join(mos_lines) + "\n")

    print(f"bonferroni: alpha {alpha} / m {m} -> {alpha_corr:.4f}")
    for cond, comp, r in results:
        print(f"{cond:<8} {comp:<24} {r.method:<36} stat={r.statistic:.4f} "
              f"p={r.p_value:.6f}")
    return results


# --------------------------------------------------------------------- main

def _build_parser() -> argparse.ArgumentParser:
    class Parser(argparse.ArgumentParser):
        def error(self, message):
            raise UsageError(message)

    parser = Parser(prog="tabflow", description=__doc__)
    parser.add_argument("--config", type=Path, default=None, help="INI config file")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--workdir", type=Path, default=None, help="override workdir")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synthdata", help="generate paired toy scores and renders")
    p.add_argument("--n", type=int, default=None, help="number of scores")

    p = sub.add_parser("render", help="render scores with one style preset")
    p.add_argument("--style", default=SOURCE_STYLE, choices=sorted(STYLE_PRESETS))

    p = sub.add_parser("train", help="train the flow on paired renders")
    p.add_argument("--out", type=Path, default=None, help="checkpoint path")

    p = sub.add_parser("transfer", help="style-transfer one WAV or score")
    p.add_argument("checkpoint", type=Path)
    p.add_argument("input", type=Path)
    p.add_argument("output", type=Path)

    p = sub.add_parser("eval", help="FAD/KAD/recon metrics against a real corpus")
    p.add_argument("--real", type=Path, required=True)
    p.add_argument("--render", type=Path, required=True)
    p.add_argument("--guitarflow", type=Path, required=True)
    p.add_argument("--conditions", default="di,amp")

    p = sub.add_parser("stats", help="Friedman/Wilcoxon analysis of a ratings CSV")
    p.add_argument("ratings", type=Path)
    p.add_argument("--m", type=int, required=True, help="Bonferroni divisor")
    p.add_argument("--alpha", type=float, default=0.05)
    return parser


def main(argv=None) -> int:
    try:
        args = _build_parser().parse_args(argv)
        overrides = {}
        if args.seed is not None:
            overrides.setdefault("cli", {})["seed"] = str(args.seed)
        if args.workdir is not None:
            overrides.setdefault("paths", {})["workdir"] = str(args.workdir)
        cfg = load_config(args.config, overrides or None)

        if args.command == "synthdata":
            stems = cmd_synthdata(cfg, args.n)
            print(f"wrote {len(stems)} scores with 2 renders each under {cfg.workdir}")
        elif args.command == "render":
            written = cmd_render(cfg, args.style)
            print(f"rendered {len(written)} files to {written[0].parent}")
        elif args.command == "train":
            cmd_train(cfg, args.out)
        elif args.command == "transfer":
            out = cmd_transfer(cfg, args.checkpoint, args.input, args.output)
            print(f"wrote {out}")
        elif args.command == "eval":
            conditions = tuple(c.strip() for c in args.conditions.split(",") if c.strip())
            cmd_eval(cfg, args.real, args.render, args.guitarflow, conditions)
        elif args.command == "stats":
            cmd_stats(cfg, args.ratings, args.m, args.alpha)
        return 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
