"""Stage orchestration of a watermarking experiment and its on-disk artifact layout.

Every stage reads the artifacts of the stages before it from the output directory and writes new
files only; a missing input names the stage that produces it.
"""

import logging
from collections.abc import Callable
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import pandas as pd

from wmlab.asr.data import Utterance, read_manifest
from wmlab.asr.model import AsrModel
from wmlab.asr.training import TrainingResult, evaluate, train, train_from_scratch
from wmlab.asr.vocab import Vocab
from wmlab.attacks.harness import (
    AttackerMaterials,
    AttackHarness,
    AttackOutcome,
    split_attacker_data,
)
from wmlab.attacks.report import AttackKind, AttackReport
from wmlab.attacks.sweeps import finetune_sweep, prune_sweep
from wmlab.audio import AudioClip, TriggerKey, read_wav, write_wav
from wmlab.datagen import (
    EVAL_MANIFEST,
    TRAIN_MANIFEST,
    ToneCorpus,
    ToneLanguageSpec,
    gen_corpus,
    gen_owner_clips,
)
from wmlab.errors import ConfigError, MissingArtifactError
from wmlab.experiment import ExperimentConfig
from wmlab.reports import summary_table, write_report
from wmlab.stego.message import StegoMessage, StegoText
from wmlab.stego.model import StegoModel, read_stegos, write_stegos
from wmlab.types import PathLike
from wmlab.utils.io import ResultWriter, fn_compatible
from wmlab.utils.plotting import plot_robustness_curves
from wmlab.watermark.embedding import EmbeddingResult, embed
from wmlab.watermark.extraction import ExtractionReport, IntegrityReport, check_integrity, extract
from wmlab.watermark.trigger_set import TriggerSet, TriggerSetBuild, build_trigger_set

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ArtifactLayout:
    root: Path

    @property
    def config(self) -> Path:
        """The experiment configuration written by datagen and read by the later stages."""
        return self.root / "config.json"

    @property
    def data_dir(self) -> Path:
        return self.root / "data"

    @property
    def train_manifest(self) -> Path:
        return self.data_dir / TRAIN_MANIFEST

    @property
    def eval_manifest(self) -> Path:
        return self.data_dir / EVAL_MANIFEST

    @property
    def models_dir(self) -> Path:
        return self.root / "models"

    @property
    def base_checkpoint(self) -> Path:
        return self.models_dir / "base.ckpt"

    @property
    def watermarked_checkpoint(self) -> Path:
        return self.models_dir / "watermarked.ckpt"

    def attacked_checkpoint(self, name: str) -> Path:
        return self.models_dir / f"attacked_{name}.ckpt"

    @property
    def stego_dir(self) -> Path:
        return self.root / "stego"

    @property
    def stego_model(self) -> Path:
        return self.stego_dir / "model.bin"

    @property
    def message(self) -> Path:
        return self.stego_dir / "message.txt"

    @property
    def stegos(self) -> Path:
        return self.stego_dir / "stegos.txt"

    @property
    def owner_dir(self) -> Path:
        return self.root / "owner"

    def owner_clip(self, clip_index: int) -> Path:
        return self.owner_dir / f"clip_{clip_index}.wav"

    @property
    def key(self) -> Path:
        return self.owner_dir / "key.txt"

    @property
    def triggers_dir(self) -> Path:
        return self.root / "triggers"

    @property
    def reports_dir(self) -> Path:
        return self.root / "reports"

    @property
    def run_log(self) -> Path:
        return self.root / "run.log"

    @staticmethod
    def require(path: Path, stage: str) -> Path:
        if not path.exists():
            raise MissingArtifactError(f"{path} does not exist; run '{stage}' first")
        return path


class WatermarkLab:
    """Runs the stages of an experiment against one output directory.

    Stage seeds are derived from the configuration's global seed, so every stage can be re-run on its
    own and reproduces the same artifacts.
    """

    def __init__(self, cfg: ExperimentConfig, output_dir: PathLike, show_progress: bool = False):
        self.cfg = cfg
        self.layout = ArtifactLayout(Path(output_dir))
        self.show_progress = show_progress
        self.layout.reports_dir.mkdir(parents=True, exist_ok=True)
        self.writer = ResultWriter(str(self.layout.reports_dir))

    @property
    def language_spec(self) -> ToneLanguageSpec:
        return self.cfg.language.model_copy(update={"seed": self.cfg.stage_seed("datagen")})

    def _report(self, name: str, data: dict) -> str:
        return write_report(self.writer, fn_compatible(name), data)

    # data

    def datagen(self) -> ToneCorpus:
        self.layout.config.write_text(self.cfg.to_json(), encoding="utf-8")
        log.info(f"Stored the experiment configuration in {self.layout.config}")
        c = self.cfg.corpus
        corpus = gen_corpus(
            self.language_spec,
            c.num_utterances,
            c.min_len,
            c.max_len,
            output_dir=self.layout.data_dir,
            show_progress=self.show_progress,
        )
        self._report(
            "datagen",
            {
                "num_train": len(corpus.train),
                "num_eval": len(corpus.eval),
                "seed": self.language_spec.seed,
                "train_manifest": TRAIN_MANIFEST,
                "eval_manifest": EVAL_MANIFEST,
            },
        )
        return corpus

    def load_train_data(self) -> list[Utterance]:
        return read_manifest(ArtifactLayout.require(self.layout.train_manifest, "datagen"))

    def load_eval_data(self) -> list[Utterance]:
        return read_manifest(ArtifactLayout.require(self.layout.eval_manifest, "datagen"))

    # ASR

    def train(self) -> TrainingResult:
        train_data = self.load_train_data()
        eval_data = self.load_eval_data()
        model = AsrModel.create(
            self.cfg.stage_seed("asr-init"), self.cfg.frontend, Vocab(), self.cfg.asr
        )
        result = train(
            model,
            train_data,
            epochs=self.cfg.asr.epochs,
            lr=self.cfg.asr.lr,
            seed=self.cfg.stage_seed("asr-train"),
            show_progress=self.show_progress,
        )
        result.model.save(self.layout.base_checkpoint)
        score = evaluate(result.model, eval_data)
        log.info(f"Baseline model: eval WER {score.wer:.4f}, CER {score.cer:.4f}")
        self._report(
            "train",
            {
                "num_train": len(train_data),
                "skipped": len(result.skipped_utterance_ids),
                "final_loss": result.loss_trace[-1] if result.loss_trace else None,
                "eval": score.to_dict(),
            },
        )
        return result

    def load_model(self, path: PathLike | None = None) -> AsrModel:
        """:param path: checkpoint to load; the watermarked model if None"""
        if path is not None:
            path = Path(path)
            if not path.exists():
                raise MissingArtifactError(f"Checkpoint {path} does not exist")
            return AsrModel.load(path)
        return AsrModel.load(ArtifactLayout.require(self.layout.watermarked_checkpoint, "embed"))

    # stego

    def owner_message(self) -> StegoMessage:
        if self.cfg.stego.message is not None:
            return StegoMessage.from_string(self.cfg.stego.message)
        return StegoMessage.random(self.cfg.stage_seed("message"), self.cfg.stego.message_bits)

    def build_stego_model(self, stage: str = "stego") -> StegoModel:
        s = self.cfg.stego
        return StegoModel.from_corpus(
            s.corpus,
            seed=self.cfg.stage_seed(stage),
            bits_per_step=s.bits_per_step,
            message_bits=s.message_bits,
        )

    def stego_encode(self) -> list[StegoText]:
        stego_model = self.build_stego_model()
        message = self.owner_message()
        stegos = stego_model.encode_message(
            message, self.cfg.watermark.n, seed=self.cfg.stage_seed("stego-encode")
        )
        self.layout.stego_dir.mkdir(parents=True, exist_ok=True)
        stego_model.save(self.layout.stego_model)
        self.layout.message.write_text(message.to_string() + "\n", encoding="utf-8")
        write_stegos(stegos, self.layout.stegos)
        self._report(
            "stego_encode",
            {
                "message": message.to_string(),
                "num_stegos": len(stegos),
                "stegos": {str(s.clip_index): s.text for s in stegos},
            },
        )
        return stegos

    def load_stego(self) -> tuple[StegoModel, StegoMessage, list[StegoText]]:
        require = ArtifactLayout.require
        stego_model = StegoModel.load(require(self.layout.stego_model, "stego-encode"))
        message = StegoMessage.from_string(
            require(self.layout.message, "stego-encode").read_text(encoding="utf-8")
        )
        return stego_model, message, read_stegos(require(self.layout.stegos, "stego-encode"))

    def stego_decode(self, text: str) -> StegoMessage:
        stego_model, message, _ = self.load_stego()
        decoded = stego_model.decode_text(text)
        self._report(
            "stego_decode",
            {"text": text, "message": decoded.to_string(), "matches_owner": decoded == message},
        )
        return decoded

    # triggers

    def trigger_synth(self) -> TriggerSetBuild:
        train_data = self.load_train_data()
        _, _, stegos = self.load_stego()
        wm = self.cfg.watermark
        if len(stegos) != wm.n:
            raise ConfigError(
                f"{len(stegos)} stegos on disk but watermark.n={wm.n}; re-run 'stego-encode'"
            )
        clips = gen_owner_clips(wm.n, self.language_spec, seed=self.cfg.stage_seed("owner-clips"))
        key = wm.resolve_key(self.cfg.stage_seed("key"))
        for i, clip in enumerate(clips):
            write_wav(clip, self.layout.owner_clip(i))
        self.layout.key.write_text("".join(f"{k!r}\n" for k in key.values), encoding="utf-8")
        build = build_trigger_set(
            train_data,
            clips,
            key,
            stegos,
            wm,
            seed=self.cfg.stage_seed("trigger-subset"),
            show_progress=self.show_progress,
        )
        build.trigger_set.save(self.layout.triggers_dir)
        self._report(
            "trigger_synth",
            {
                "num_triggers": len(build.trigger_set),
                "num_mixture": len(build.mixture),
                "key": list(key.values),
                "group_sizes": [len(g) for g in build.trigger_set.group_indices().values()],
            },
        )
        return build

    def load_owner_clips(self) -> list[AudioClip]:
        return [
            read_wav(ArtifactLayout.require(self.layout.owner_clip(i), "trigger-synth"))
            for i in range(self.cfg.watermark.n)
        ]

    def load_owner_key(self) -> TriggerKey:
        text = ArtifactLayout.require(self.layout.key, "trigger-synth").read_text(encoding="utf-8")
        return TriggerKey(tuple(float(line) for line in text.split()))

    def load_trigger_set(self) -> TriggerSet:
        ArtifactLayout.require(self.layout.triggers_dir, "trigger-synth")
        return TriggerSet.load(self.layout.triggers_dir)

    # embedding and extraction

    def embedding_mixture(
        self, trigger_set: TriggerSet, train_data: list[Utterance]
    ) -> list[Utterance]:
        """The triggers plus the clean utterances they were synthesized from."""
        by_id = {u.id: u for u in train_data}
        missing = {s.source_id for s in trigger_set.samples} - by_id.keys()
        if missing:
            raise MissingArtifactError(
                f"{len(missing)} trigger sources are not in the training manifest; re-run 'trigger-synth'"
            )
        return trigger_set.to_utterances() + [by_id[s.source_id] for s in trigger_set.samples]

    def embed(self) -> EmbeddingResult:
        model = AsrModel.load(ArtifactLayout.require(self.layout.base_checkpoint, "train"))
        trigger_set = self.load_trigger_set()
        mixture = self.embedding_mixture(trigger_set, self.load_train_data())
        result = embed(
            model,
            mixture,
            self.cfg.watermark,
            seed=self.cfg.stage_seed("embed"),
            clean_eval=self.load_eval_data(),
            show_progress=self.show_progress,
        )
        result.model.save(self.layout.watermarked_checkpoint)
        self._report(
            "embed",
            {
                "num_mixture": len(mixture),
                "epochs": self.cfg.watermark.epochs,
                "lr": self.cfg.watermark.lr,
                "final_loss": result.loss_trace[-1] if result.loss_trace else None,
                "fidelity": result.fidelity.to_dict() if result.fidelity else None,
            },
        )
        return result

    def extract(self, model_path: PathLike | None = None) -> ExtractionReport:
        """Black-box extraction against the given checkpoint (the watermarked model by default)."""
        model = self.load_model(model_path)
        stego_model, message, _ = self.load_stego()
        report = extract(
            model.as_predict_fn(),
            self.load_trigger_set(),
            stego_model,
            message,
            self.cfg.watermark,
            show_progress=self.show_progress,
        )
        name = "watermarked" if model_path is None else Path(model_path).stem
        self._report(f"extract_{name}", {"model": name, **report.to_dict()})
        return report

    def integrity(self) -> IntegrityReport:
        """Extraction against independently seeded models trained without triggers."""
        train_data = self.load_train_data()
        template = AsrModel.load(ArtifactLayout.require(self.layout.base_checkpoint, "train"))
        stego_model, message, _ = self.load_stego()
        models = [
            train_from_scratch(
                train_data,
                init_seed=self.cfg.stage_seed(f"integrity-{i}-init"),
                shuffle_seed=self.cfg.stage_seed(f"integrity-{i}-train"),
                template=template,
                show_progress=self.show_progress,
            ).model
            for i in range(self.cfg.attacks.num_integrity_models)
        ]
        report = check_integrity(
            [m.as_predict_fn() for m in models],
            self.load_trigger_set(),
            stego_model,
            message,
            self.cfg.watermark,
        )
        self._report("integrity", report.to_dict())
        return report

    # attacks

    def attack_harness(self, model_path: PathLike | None = None) -> AttackHarness:
        attacker_data, clean_eval = split_attacker_data(
            self.load_eval_data(), self.cfg.attacks.attack_fraction
        )
        stego_model, message, _ = self.load_stego()
        return AttackHarness(
            model=self.load_model(model_path),
            original_lr=self.cfg.asr.lr,
            attacker_data=attacker_data,
            clean_eval=clean_eval,
            trigger_set=self.load_trigger_set(),
            stego_model=stego_model,
            message=message,
            cfg=self.cfg.watermark,
            seed=self.cfg.stage_seed("attacks"),
            lr_ratio=self.cfg.attacks.lr_ratio,
            owner_key=self.load_owner_key(),
        )

    def attacker_materials(self) -> AttackerMaterials:
        """The overwriting attacker's own clips, stego model, message and stegos."""
        n = self.cfg.watermark.n
        stego_model = self.build_stego_model("attacker-stego")
        message = StegoMessage.random(
            self.cfg.stage_seed("attacker-message"), self.cfg.stego.message_bits
        )
        return AttackerMaterials(
            clips=gen_owner_clips(
                n, self.language_spec, seed=self.cfg.stage_seed("attacker-clips")
            ),
            stego_model=stego_model,
            message=message,
            stegos=stego_model.encode_message(
                message, n, seed=self.cfg.stage_seed("attacker-encode")
            ),
        )

    def attack(
        self,
        kind: AttackKind,
        sparsity: float | None = None,
        epochs: int | None = None,
        intercepted: int | None = None,
        model_path: PathLike | None = None,
    ) -> AttackReport:
        """Runs a single attack, saves the attacked model (if any) and writes the attack report.

        The attacked checkpoint and the report share the attack's name, e.g. ``prune_0.5``.

        :raises ConfigError: if the attacked checkpoint would overwrite one of the attack's inputs
        """
        run_attack: Callable[[AttackHarness], AttackOutcome]
        match kind:
            case AttackKind.PRUNE:
                if sparsity is None:
                    raise ConfigError("The prune attack needs --sparsity (or --sweep)")
                recovery = self.cfg.attacks.prune_recovery_epochs if epochs is None else epochs
                run_attack = partial(AttackHarness.prune, sparsity=sparsity, epochs=recovery)
                name = f"prune_{sparsity}"
            case AttackKind.FINETUNE:
                epochs = self.cfg.attacks.finetune_epochs if epochs is None else epochs
                run_attack = partial(AttackHarness.finetune, epochs=epochs)
                name = f"finetune_{epochs}"
            case AttackKind.OVERWRITE:
                run_attack = self._overwrite
                name = "overwrite"
            case AttackKind.LABEL_DETECTION:
                intercepted = self.cfg.attacks.intercepted if intercepted is None else intercepted
                run_attack = partial(AttackHarness.label_detection, num_intercepted=intercepted)
                name = f"evasion_{intercepted}"
            case AttackKind.STEGANALYSIS:
                run_attack = AttackHarness.steganalysis
                name = "steganalysis"
            case _:
                raise ValueError(f"Unknown attack: {kind}")
        name = fn_compatible(name)
        checkpoint = self.layout.attacked_checkpoint(name)
        self._check_not_an_input(checkpoint, model_path)
        outcome = run_attack(self.attack_harness(model_path))
        if outcome.model is not None:
            outcome.model.save(checkpoint)
        self._report(f"attack_{name}", outcome.report.to_dict())
        return outcome.report

    def _overwrite(self, harness: AttackHarness) -> AttackOutcome:
        return harness.overwrite(self.attacker_materials())

    def _check_not_an_input(self, output: Path, model_path: PathLike | None) -> None:
        inputs = [self.layout.base_checkpoint, self.layout.watermarked_checkpoint]
        if model_path is not None:
            inputs.append(Path(model_path))
        resolved = output.resolve()
        for path in inputs:
            if path.resolve() == resolved:
                raise ConfigError(f"Refusing to overwrite the input {path} with the attacked model")

    def sweep(self, kind: AttackKind, model_path: PathLike | None = None) -> pd.DataFrame:
        """Robustness curve over the configured grid, written as CSV table and figure."""
        harness = self.attack_harness(model_path)
        match kind:
            case AttackKind.PRUNE:
                df = prune_sweep(
                    harness,
                    self.cfg.attacks.prune_sparsities,
                    recovery_epochs=self.cfg.attacks.prune_recovery_epochs,
                    show_progress=self.show_progress,
                )
                x = "sparsity"
            case AttackKind.FINETUNE:
                df = finetune_sweep(
                    harness, self.cfg.attacks.finetune_epoch_grid, show_progress=self.show_progress
                )
                x = "epochs"
            case _:
                raise ConfigError(f"No sweep is defined for the {kind.value} attack")
        self.writer.write_data_frame_csv_file(f"sweep_{kind.value}", df, index=False)
        self.writer.write_figure_file(
            f"sweep_{kind.value}", plot_robustness_curves(df, x, title=f"{kind.value} attack")
        )
        return df

    # summary

    def report(self) -> pd.DataFrame:
        paths = sorted(self.layout.reports_dir.glob("*.txt"))
        if not paths:
            raise MissingArtifactError(
                f"No reports in {self.layout.reports_dir}; run a stage first"
            )
        df = summary_table(paths)
        self.writer.write_data_frame_csv_file("summary", df, index=False)
        return df

    def run_pipeline(self) -> ExtractionReport:
        """datagen, train, stego-encode, trigger-synth, embed and extract in sequence."""
        self.datagen()
        self.train()
        self.stego_encode()
        self.trigger_synth()
        self.embed()
        return self.extract()
