from typing import Dict, Tuple, Type

from .base import Check, CheckContext, CheckOutcome
from .kernels import (
    BoundFitCheck,
    KernelMassCheck,
    NormSlopesCheck,
    ScalingIdentityCheck,
    UltracontractivityCheck,
)
from .symbolic import AppendixCheck, LFOracleCheck, SymbolCheck
from .variable import (
    Hypothesis1Check,
    Hypothesis2Check,
    Hypothesis3Check,
    TwistedFormLowerCheck,
    TwistedSemigroupNormCheck,
    VariableBoundFitCheck,
)

CHECKS: Dict[str, Type[Check]] = {
    cls.name: cls
    for cls in (
        SymbolCheck,
        AppendixCheck,
        LFOracleCheck,
        ScalingIdentityCheck,
        KernelMassCheck,
        NormSlopesCheck,
        UltracontractivityCheck,
        BoundFitCheck,
        Hypothesis1Check,
        Hypothesis2Check,
        Hypothesis3Check,
        TwistedSemigroupNormCheck,
        TwistedFormLowerCheck,
        VariableBoundFitCheck,
    )
}

# subcommand -> checks it runs
PRESETS: Dict[str, Tuple[str, ...]] = {
    "symbol-check": ("symbol_check", "appendix"),
    "lf": ("lf_oracle",),
    "kernel": ("scaling_identity", "mass", "norm_slopes", "ultracontractivity"),
    "fit-bound": ("bound_fit",),
    "vc-run": ("hypothesis1", "hypothesis2", "twisted_sg_norm", "twisted_form_lower", "vc_bound_fit"),
    "hyp": ("hypothesis1", "hypothesis2", "hypothesis3"),
}

# checks that need a coefficient field rather than a bare symbol
NEEDS_COEFFICIENTS = frozenset(
    name for name, cls in CHECKS.items() if cls.__module__.endswith(".variable")
)

__all__ = [
    "CHECKS",
    "NEEDS_COEFFICIENTS",
    "PRESETS",
    "Check",
    "CheckContext",
    "CheckOutcome",
]
