"""Command-line entry point ``wmlab``.

Each sub-command runs one stage of a watermarking experiment against an output directory:

    wmlab datagen --config configs/default.json --out results/run
    wmlab train --out results/run
    wmlab stego-encode --out results/run
    wmlab trigger-synth --out results/run
    wmlab embed --out results/run
    wmlab extract --out results/run
    wmlab attack --kind prune --sparsity 0.5 --out results/run
    wmlab extract --model results/run/models/attacked_prune_0.5.ckpt --out results/run
    wmlab report --out results/run

Exit status: 0 on success, 1 on any error or a failed extraction, 2 on invalid configuration or usage.
"""

import sys
from collections.abc import Callable, Sequence
from pathlib import Path

from jsonargparse import ActionYesNo, ArgumentParser, Namespace
from sensai.util import logging
from termcolor import colored

from wmlab.attacks.report import AttackKind
from wmlab.config import get_config
from wmlab.errors import ConfigError, WmlabError
from wmlab.experiment import ExperimentConfig
from wmlab.lab import ArtifactLayout, WatermarkLab

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2


def print_green(text: str) -> None:
    print(colored(text, "green"))


def print_red(text: str) -> None:
    print(colored(text, "red"))


def print_blue(text: str) -> None:
    print(colored(text, "blue"))


def _add_common_arguments(parser: ArgumentParser) -> None:
    parser.add_argument(
        "--config", type=str | None, default=None, help="experiment configuration (JSON)"
    )
    parser.add_argument("--seed", type=int | None, default=None, help="overrides the global seed")
    parser.add_argument("--out", type=str | None, default=None, help="output directory")
    parser.add_argument(
        "--show_progress", action=ActionYesNo, default=False, help="show progress bars"
    )


def _subparser(description: str) -> ArgumentParser:
    parser = ArgumentParser(description=description)
    _add_common_arguments(parser)
    return parser


def build_parser() -> ArgumentParser:
    parser = ArgumentParser(
        prog="wmlab", description="Black-box watermarking lab for CTC speech recognizers"
    )
    subcommands = parser.add_subcommands(dest="command")

    subcommands.add_subcommand("datagen", _subparser("Generate the tone-language corpus"))
    subcommands.add_subcommand("train", _subparser("Train the baseline recognizer"))
    subcommands.add_subcommand(
        "stego-encode", _subparser("Build the stego model and encode the owner's message")
    )

    decode = _subparser("Decode the message hidden in a stego text")
    decode.add_argument("--text", type=str, required=True)
    subcommands.add_subcommand("stego-decode", decode)

    subcommands.add_subcommand(
        "trigger-synth", _subparser("Generate owner clips and key and synthesize the trigger set")
    )
    subcommands.add_subcommand("embed", _subparser("Embed the watermark by fine-tuning"))

    extract = _subparser("Verify the watermark through the prediction interface")
    extract.add_argument(
        "--model", type=str | None, default=None, help="checkpoint; the watermarked model by default"
    )
    subcommands.add_subcommand("extract", extract)

    attack = _subparser("Attack the watermarked model")
    attack.add_argument(
        "--kind", type=str, required=True, help=f"one of {', '.join(k.value for k in AttackKind)}"
    )
    attack.add_argument("--sparsity", type=float | None, default=None)
    attack.add_argument(
        "--epochs", type=int | None, default=None, help="fine-tuning or pruning recovery epochs"
    )
    attack.add_argument(
        "--intercepted", type=int | None, default=None, help="stegos intercepted by the evasion"
    )
    attack.add_argument("--model", type=str | None, default=None)
    attack.add_argument(
        "--sweep", action=ActionYesNo, default=False, help="run the configured grid (prune, finetune)"
    )
    subcommands.add_subcommand("attack", attack)

    subcommands.add_subcommand(
        "report", _subparser("Summarize all reports of the output directory")
    )
    return parser


def load_experiment_config(path: str | None) -> ExperimentConfig:
    if path is None:
        try:
            path = get_config().default_experiment_config_path()
        except FileNotFoundError as e:
            raise ConfigError(
                f"No --config given and the default configuration is missing: {e}"
            ) from e
    return ExperimentConfig.from_file(path)


def load_run_config(config: str | None, out: str | None) -> tuple[ExperimentConfig, Path]:
    """Loads the experiment configuration of a run and resolves its output directory.

    Precedence: ``--config``, then the ``config.json`` that ``datagen`` stored in the output
    directory, then the default experiment configuration.
    """
    if config is None:
        stored = ArtifactLayout(get_config().resolve_output_dir(out)).config
        if stored.exists():
            log.info(f"Using the experiment configuration stored in {stored}")
            return ExperimentConfig.from_file(stored), stored.parent
    cfg = load_experiment_config(config)
    return cfg, get_config().resolve_output_dir(out, cfg.output_dir)


def _parse_attack_kind(value: str) -> AttackKind:
    try:
        return AttackKind(value)
    except ValueError as e:
        raise ConfigError(
            f"Unknown attack kind '{value}', expected one of {[k.value for k in AttackKind]}"
        ) from e


def _run_extract(lab: WatermarkLab, opts: Namespace) -> int:
    report = lab.extract(opts.model)
    ber = "none" if report.ber is None else f"{report.ber:.3f}"
    line = f"verdict={report.verdict} wer={report.wer:.4f} cer={report.cer:.4f} ber={ber}"
    if report.succeeded:
        print_green(line)
        return EXIT_OK
    print_red(line)
    return EXIT_FAILURE


def _run_attack(lab: WatermarkLab, opts: Namespace) -> int:
    kind = _parse_attack_kind(opts.kind)
    if opts.sweep:
        print(lab.sweep(kind, opts.model).to_string(index=False))
        return EXIT_OK
    report = lab.attack(
        kind,
        sparsity=opts.sparsity,
        epochs=opts.epochs,
        intercepted=opts.intercepted,
        model_path=opts.model,
    )
    line = (
        f"attack={kind.value} watermark_survived={report.watermark_survived} "
        f"clean_cer={report.clean_after.cer:.4f} ({report.cer_delta_pp:+.2f} pp)"
    )
    (print_green if report.watermark_survived else print_red)(line)
    return EXIT_OK


def _run_stego_decode(lab: WatermarkLab, opts: Namespace) -> int:
    print_blue(lab.stego_decode(opts.text).to_string())
    return EXIT_OK


def _run_report(lab: WatermarkLab, opts: Namespace) -> int:
    print(lab.report().to_string(index=False))
    return EXIT_OK


def _run_stage(
    stage: Callable[[WatermarkLab], object],
) -> Callable[[WatermarkLab, Namespace], int]:
    def run_stage(lab: WatermarkLab, opts: Namespace) -> int:
        stage(lab)
        return EXIT_OK

    return run_stage


COMMANDS: dict[str, Callable[[WatermarkLab, Namespace], int]] = {
    "datagen": _run_stage(WatermarkLab.datagen),
    "train": _run_stage(WatermarkLab.train),
    "stego-encode": _run_stage(WatermarkLab.stego_encode),
    "stego-decode": _run_stego_decode,
    "trigger-synth": _run_stage(WatermarkLab.trigger_synth),
    "embed": _run_stage(WatermarkLab.embed),
    "extract": _run_extract,
    "attack": _run_attack,
    "report": _run_report,
}


def run(argv: Sequence[str] | None = None) -> int:
    """Parses the arguments, runs the command and returns the exit status."""
    args = build_parser().parse_args(list(argv) if argv is not None else None)
    command = args.command
    opts = args[command]
    try:
        cfg, out = load_run_config(opts.config, opts.out)
        cfg = cfg.with_seed(opts.seed)
        out.mkdir(parents=True, exist_ok=True)
        logging.add_file_logger(str(Path(out) / "run.log"))
        log.info(f"Running '{command}' with seed {cfg.seed} in {out}")
        return COMMANDS[command](WatermarkLab(cfg, out, show_progress=opts.show_progress), opts)
    except ConfigError as e:
        log.error(str(e))
        print_red(f"error: {e}")
        return EXIT_USAGE
    except WmlabError as e:
        log.error(f"'{command}' failed: {e}")
        print_red(f"error: {e}")
        return EXIT_FAILURE
    except Exception:
        log.exception(f"'{command}' failed unexpectedly")
        return EXIT_FAILURE


def main() -> None:
    logging.configure(level=logging.INFO)
    sys.exit(run())


if __name__ == "__main__":
    main()
