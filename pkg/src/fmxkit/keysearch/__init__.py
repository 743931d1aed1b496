from .detector import LENIENT, PlaintextDetector, Verdict, try_key
from .engine import (
    AttackPlan,
    Exhausted,
    Found,
    Phase,
    SearchReport,
    default_plan,
    measure_throughput,
    run_attack,
)
from .families import (
    PATTERN_FAMILIES,
    CandidateFamily,
    FamilyParams,
    gen_device_code_variations,
    gen_digest_combinations,
    gen_hardware_combos,
    gen_lcg_seeded,
    gen_suffix_keys,
    gen_timestamp_keys,
    generate,
    generate_pattern_keys,
)

__all__ = [
    "AttackPlan", "LENIENT", "CandidateFamily", "Exhausted", "FamilyParams", "Found", "PATTERN_FAMILIES",
    "Phase", "PlaintextDetector", "SearchReport", "Verdict", "default_plan",
    "gen_device_code_variations", "gen_digest_combinations", "gen_hardware_combos",
    "gen_lcg_seeded", "gen_suffix_keys", "gen_timestamp_keys", "generate",
    "generate_pattern_keys", "measure_throughput", "run_attack", "try_key",
]
