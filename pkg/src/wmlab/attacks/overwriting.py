import logging
from collections.abc import Sequence
from dataclasses import dataclass

from wmlab.asr.data import Utterance
from wmlab.asr.model import AsrModel
from wmlab.audio import AudioClip, TriggerKey
from wmlab.stego.message import StegoText
from wmlab.watermark.embedding import embed
from wmlab.watermark.trigger_set import TriggerSet, WatermarkConfig, build_trigger_set

log = logging.getLogger(__name__)


@dataclass
class OverwriteResult:
    model: AsrModel
    key: TriggerKey
    """the attacker's key k'"""
    trigger_set: TriggerSet
    """the attacker's own trigger set"""


def sample_attacker_key(owner_key: TriggerKey, n: int, seed: int) -> TriggerKey:
    """n values drawn uniformly between the smallest and largest value of the owner's key."""
    return TriggerKey.random(n, min(owner_key.values), max(owner_key.values), seed)


def overwrite_attack(
    model: AsrModel,
    attacker_data: Sequence[Utterance],
    attacker_clips: Sequence[AudioClip],
    attacker_stegos: Sequence[StegoText],
    owner_key: TriggerKey,
    cfg: WatermarkConfig,
    key_seed: int,
    subset_seed: int,
    train_seed: int,
) -> OverwriteResult:
    """Embeds a second watermark with the attacker's own clips, stegos and key.

    The attacker only knows the key range; the trigger set is capped at the size of the attacker's data.
    """
    key = sample_attacker_key(owner_key, len(attacker_clips), key_seed)
    attacker_cfg = cfg.model_copy(
        update={
            "n": len(attacker_clips),
            "key": key.values,
            "trigger_set_size": min(cfg.trigger_set_size, len(attacker_data)),
        }
    )
    build = build_trigger_set(
        attacker_data, attacker_clips, key, attacker_stegos, attacker_cfg, seed=subset_seed
    )
    log.info(f"Overwriting with {len(build.trigger_set)} attacker triggers, key {key.values}")
    result = embed(model, build.mixture, attacker_cfg, seed=train_seed)
    return OverwriteResult(model=result.model, key=key, trigger_set=build.trigger_set)
