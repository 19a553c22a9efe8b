"""``bdmec`` command line."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from .config import ConfigError, read_config_dict
from .harness import IoFailure, UnknownPreset, PRESETS, preset_spec, replay_manifest, run_spec
from .ledger import Channel, LedgerFormatError, LedgerStore
from .model import Invalid, InvalidRange


def _fail(kind, message, code=1):
    click.echo(json.dumps({"error": kind, "message": str(message)}), err=True)
    sys.exit(code)


def _guard(fn):
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except UnknownPreset as exc:
            _fail("UnknownPreset", f"unknown preset {exc.args[0]!r}; known: {', '.join(PRESETS)}")
        except (Invalid, InvalidRange, ConfigError) as exc:
            _fail(type(exc).__name__, exc)
        except LedgerFormatError as exc:
            _fail("LedgerFormatError", exc)
        except (IoFailure, OSError) as exc:
            _fail("IoFailure", exc)
        except KeyError as exc:
            _fail("InvalidOverride", exc.args[0] if exc.args else exc)
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


@click.group()
def main():
    """Work-stealing offload simulator with ledger-backed worker selection."""


@main.command()
@click.option("--preset", required=True, help="speed-gain | malicious | small-jobs | privacy-tradeoff")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="TOML/JSON file merged over the preset scenario.")
@click.option("--seed", type=int, help="Base seed (repetition r uses seed + r).")
@click.option("--repetitions", type=int)
@click.option("--iterations", type=int)
@click.option("--trials", type=int, help="Trials per cell (privacy preset).")
@click.option("--out", "out_dir", default="out", show_default=True, type=click.Path(file_okay=False))
@_guard
def run(preset, config_path, seed, repetitions, iterations, trials, out_dir):
    """Run a named experiment preset and write CSVs plus a manifest."""
    overrides = {}
    if config_path:
        overrides["config"] = read_config_dict(config_path)
    if seed is not None:
        overrides["seed"] = seed
    if repetitions is not None:
        overrides["repetitions"] = repetitions
    if iterations is not None:
        overrides["iterations"] = iterations
    if trials is not None:
        overrides["trials"] = trials
    spec = preset_spec(preset, overrides)
    for p in run_spec(spec, out_dir):
        click.echo(str(p))


@main.command()
@click.option("--manifest", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_guard
def replay(manifest, out_dir):
    """Re-run exactly what a manifest describes."""
    for p in replay_manifest(manifest, out_dir):
        click.echo(str(p))


@main.command()
@click.option("--ledger", "ledger_path", required=True, type=click.Path(exists=True, dir_okay=False))
@_guard
def verify(ledger_path):
    """Check per-line digests and both hash chains of an exported ledger."""
    store = LedgerStore.load(ledger_path, strict=False)
    bad = [(ch.name.lower(), h, why) for ch, h, why in store.import_problems]
    for ch in Channel:
        bad.extend((ch.name.lower(), v.height, v.reason) for v in store.verify_chain(ch))
        click.echo(f"{ch.name.lower()}: {store.height(ch)} blocks after genesis")
    if bad:
        for ch, h, why in bad:
            click.echo(f"violation channel={ch} height={h} reason={why}")
        _fail("ChainViolation", f"{len(bad)} violation(s)", code=3)
    click.echo("ok")


@main.command()
@click.option("--epsilon-list", default="0.01,0.1,0.5,1,2", show_default=True)
@click.option("--trials", default=10000, show_default=True, type=int)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--counts", default=None, help="worker=count pairs, e.g. worker-1=316,worker-2=217")
@click.option("--out", "out_dir", default="out", show_default=True, type=click.Path(file_okay=False))
@_guard
def privacy(epsilon_list, trials, seed, counts, out_dir):
    """Relative error / precision sweep over privacy budgets."""
    try:
        eps = [float(e) for e in epsilon_list.split(",") if e.strip()]
    except ValueError:
        _fail("InvalidArgument", f"bad --epsilon-list {epsilon_list!r}")
    if not eps or any(e <= 0 for e in eps):
        _fail("InvalidArgument", "epsilons must be positive")
    overrides = {"epsilons": eps, "trials": trials, "seed": seed}
    if counts:
        try:
            overrides["true_counts"] = {k.strip(): int(v) for k, v in
                                        (pair.split("=") for pair in counts.split(","))}
        except ValueError:
            _fail("InvalidArgument", f"bad --counts {counts!r}")
    spec = preset_spec("privacy-tradeoff", overrides)
    files = run_spec(spec, out_dir)
    click.echo(Path(files[0]).read_text(), nl=False)


if __name__ == "__main__":
    main()
