class WmlabError(Exception):
    pass


class InvalidInputError(WmlabError, ValueError):
    pass


class DegeneratePatternError(WmlabError):
    pass


class AudioFormatError(WmlabError):
    pass


class StegoEncodingError(WmlabError):
    pass


class UndecodableTextError(WmlabError):
    pass


class StegoModelFormatError(WmlabError):
    pass


class UndefinedRateError(WmlabError):
    pass


class CheckpointFormatError(WmlabError):
    pass


class ConfigError(WmlabError):
    pass


class MissingArtifactError(WmlabError):
    pass


class TrainingDivergedError(WmlabError):
    def __init__(self, message: str, epoch: int, batch_index: int, utterance_ids: list[str]):
        super().__init__(
            f"{message} (epoch={epoch}, batch={batch_index}, utterances={utterance_ids})"
        )
        self.epoch = epoch
        self.batch_index = batch_index
        self.utterance_ids = utterance_ids


class ExtractionQueryError(WmlabError):
    def __init__(self, message: str, completed: dict[int, str]):
        super().__init__(f"{message}; {len(completed)} queries completed before the failure")
        self.completed = completed
        """
        mapping from trigger index to the prediction obtained before the failure
        """
