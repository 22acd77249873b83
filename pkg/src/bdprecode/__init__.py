"""Block-diagonalization type MU-MIMO precoders over 802.11ac-style OFDM channels."""
from bdprecode.channel import AntennaConfig, OfdmConfig, UserChannelSet, generate_realization
from bdprecode.errors import (
    BDPrecodeError,
    ConfigError,
    DecompositionError,
    DimensionError,
    NumericalError,
    PreconditionError,
    SingularityError,
)
from bdprecode.precoders import ALL_ALGORITHMS, AlgorithmId, PrecodeParams, PrecodeSolution, precode

__version__ = "0.1.0"

__all__ = [
    "ALL_ALGORITHMS",
    "AlgorithmId",
    "AntennaConfig",
    "BDPrecodeError",
    "ConfigError",
    "DecompositionError",
    "DimensionError",
    "NumericalError",
    "OfdmConfig",
    "PrecodeParams",
    "PrecodeSolution",
    "PreconditionError",
    "SingularityError",
    "UserChannelSet",
    "__version__",
    "generate_realization",
    "precode",
]
