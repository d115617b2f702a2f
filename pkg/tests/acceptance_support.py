"""Trained-agent cache for the acceptance suite.

The acceptance criteria evaluate agents produced by full training runs
that take tens of minutes. Runs are cached under .acceptance_cache keyed
by a hash of their exact configuration, so repeated test sessions reuse
them; training is seeded and bit-deterministic, which the fast property
suite verifies independently. Delete the cache directory to retrain from
scratch. Can be run directly to pre-warm every cached run:

    python3 tests/acceptance_support.py
"""

import shutil
import sys
import time
from dataclasses import replace
from pathlib import Path

from courtforge.agent import VARIANT_DUELING, VARIANT_VANILLA, AgentConfig
from courtforge.training import (
    TrainConfig,
    config_hash,
    load_checkpoint,
    load_metrics,
    train,
)

CACHE_ROOT = Path(__file__).resolve().parent.parent / ".acceptance_cache"

ACCEPTANCE_SEED = 1


def full_run_config(variant: str):
    """Full-length training run config for one agent variant, and its cache dir."""
    config = TrainConfig(
        seed=ACCEPTANCE_SEED,
        out_dir=None,
        checkpoint_every=0,
        agent=AgentConfig(variant=variant),
    )
    out = CACHE_ROOT / f"{variant}-{config_hash(config)}"
    return replace(config, out_dir=str(out)), out


def smoke_run_config():
    """Short fixed-difficulty run config (150 episodes at skill 0.40), and its cache dir."""
    config = TrainConfig(
        episodes=150,
        schedule=((0, 0.40),),
        seed=ACCEPTANCE_SEED,
        out_dir=None,
        checkpoint_every=0,
    )
    out = CACHE_ROOT / f"smoke-{config_hash(config)}"
    return replace(config, out_dir=str(out)), out


def _progress(row) -> None:
    if row.episode % 100 == 0:
        print(
            f"[acceptance-train] episode {row.episode} skill {row.skill:.2f} "
            f"epsilon {row.epsilon:.3f} rolling win {row.rolling_win_rate:.2f}",
            file=sys.stderr,
            flush=True,
        )


def run_elapsed_seconds(out: Path):
    """Recorded wall-clock training time for a cached run, or None."""
    path = out / "elapsed_seconds.txt"
    if not path.exists():
        return None
    return float(path.read_text(encoding="utf-8").strip())


def ensure_run(config: TrainConfig, out: Path):
    """Train into the cache dir unless a complete run is already there.

    Returns (checkpoint path, metrics rows, freshly_trained flag). Fresh
    runs record their wall-clock duration next to the checkpoint.
    """
    checkpoint = out / "agent_final.ckpt"
    metrics_path = out / "metrics.csv"
    if checkpoint.exists() and metrics_path.exists():
        rows = load_metrics(metrics_path)
        if len(rows) == config.episodes:
            return checkpoint, rows, False
    if out.exists():
        shutil.rmtree(out)
    started = time.perf_counter()
    result = train(config, log=_progress)
    elapsed = time.perf_counter() - started
    with open(out / "elapsed_seconds.txt", "w", encoding="utf-8") as fh:
        fh.write(f"{elapsed!r}\n")
    return result.checkpoint_path, result.metrics, True


def load_cached_agent(config: TrainConfig, out: Path):
    checkpoint, rows, _ = ensure_run(config, out)
    agent, header = load_checkpoint(checkpoint, expected_variant=config.agent.variant)
    return agent, header, rows


# ---------------------------------------------------------------------------
# acceptance result lines
# ---------------------------------------------------------------------------

# One verdict line per criterion, echoed in the terminal summary by conftest
# so the outcome of every criterion is visible in normal pytest output.
ACCEPTANCE_LINES: list = []


def record_acceptance(criterion: str, passed: bool, detail: str) -> str:
    verdict = "PASS" if passed else "FAIL"
    line = f"ACCEPTANCE {verdict} - {criterion}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return line


def warm_all() -> None:
    for label, (config, out) in (
        ("dueling full run", full_run_config(VARIANT_DUELING)),
        ("vanilla full run", full_run_config(VARIANT_VANILLA)),
        ("fixed-skill smoke run", smoke_run_config()),
    ):
        print(f"[acceptance-train] ensuring {label} in {out}", file=sys.stderr, flush=True)
        _, rows, fresh = ensure_run(config, out)
        state = "trained" if fresh else "cached"
        print(
            f"[acceptance-train] {label}: {state}, {len(rows)} episodes, "
            f"final rolling win {rows[-1].rolling_win_rate:.2f}",
            file=sys.stderr,
            flush=True,
        )


if __name__ == "__main__":
    warm_all()
