"""Constants used throughout the project."""

SAMPLE_RATE_HZ = 16000
PCM_16_SCALE = 2**15

# Output alphabet of the recognizer; the CTC blank is appended after the last character.
VOCAB_CHARACTERS = "abcdefghijklmnopqrstuvwxyz '"

MESSAGE_BITS = 20
BITS_PER_STEP = 1

# Extraction thresholds as used in the original evaluation protocol
T_WER = 0.25
T_CER = 0.30

OWNER_CLIP_MIN_MS = 100
OWNER_CLIP_MAX_MS = 300

ENV_OUTPUT_DIR = "WMLAB_OUT"
