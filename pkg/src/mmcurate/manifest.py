"""Training-run manifests: architectures, stage schedules, label masks.

Nothing here trains anything. The module pins down what a run would be
(which components, frozen or not, which hyperparameters, how labels are
masked) as a JSON document a training harness can consume.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .errors import ManifestError

IGNORE_INDEX = -100

# Component parameter totals may disagree with a declared total by rounding;
# anything past this is a real inconsistency.
PARAM_TOLERANCE = 2_000_000

ROLES = ("frozen", "trainable", "adapter")

STAGES = (1, 2)


@dataclass(frozen=True)
class ComponentSpec:
    name: str
    param_count: int
    roles: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.param_count <= 0:
            raise ManifestError(f"component {self.name}: param_count must be positive")
        object.__setattr__(self, "roles", dict(self.roles))
        if set(self.roles) != set(STAGES):
            raise ManifestError(f"component {self.name}: needs a role for stages 1 and 2")
        for stage, role in self.roles.items():
            if role not in ROLES:
                raise ManifestError(
                    f"component {self.name}: unknown role {role!r} for stage {stage}"
                )

    def role(self, stage: int) -> str:
        return self.roles[stage]


@dataclass(frozen=True)
class ArchitectureSpec:
    name: str
    components: tuple[ComponentSpec, ...]
    declared_total: int

    def __post_init__(self) -> None:
        names = [c.name for c in self.components]
        if len(set(names)) != len(names):
            raise ManifestError(f"{self.name}: duplicate component names")
        delta = abs(self.component_total - self.declared_total)
        if delta > PARAM_TOLERANCE:
            raise ManifestError(
                f"{self.name}: components sum to {self.component_total} but "
                f"declared total is {self.declared_total} (off by {delta})"
            )

    @property
    def component_total(self) -> int:
        return sum(c.param_count for c in self.components)

    def trainable_params(self, stage: int) -> int:
        """Parameters updated in a stage. Adapter components count zero here;
        adapter weights are extra parameters sized by the adapter config."""
        return sum(c.param_count for c in self.components if c.role(stage) == "trainable")


def builtin_architectures() -> dict[str, ArchitectureSpec]:
    """The four supported model assemblies.

    Two encoder stacks crossed with two Arabic LLMs. The projection layer is
    the only fully trainable piece in both stages; the LLM is frozen during
    alignment and adapter-tuned during instruction tuning.
    """
    both = lambda role: {1: role, 2: role}
    qformer_stack = lambda llm_params, total, llm_name: ArchitectureSpec(
        name=f"instructblip-{llm_name}",
        components=(
            ComponentSpec("vision_encoder", 986_000_000, both("frozen")),
            ComponentSpec("qformer", 186_000_000, both("frozen")),
            ComponentSpec("projection", 3_000_000, both("trainable")),
            ComponentSpec("llm", llm_params, {1: "frozen", 2: "adapter"}),
        ),
        declared_total=total,
    )
    mlp_stack = lambda llm_params, total, llm_name: ArchitectureSpec(
        name=f"llava-{llm_name}",
        components=(
            ComponentSpec("vision_encoder", 304_000_000, both("frozen")),
            ComponentSpec("projection", 21_000_000, both("trainable")),
            ComponentSpec("llm", llm_params, {1: "frozen", 2: "adapter"}),
        ),
        declared_total=total,
    )
    specs = [
        qformer_stack(6_968_000_000, 8_142_000_000, "arallama"),
        qformer_stack(6_738_000_000, 7_913_000_000, "acegpt"),
        mlp_stack(6_967_000_000, 7_292_000_000, "arallama"),
        mlp_stack(6_738_000_000, 7_063_000_000, "acegpt"),
    ]
    return {spec.name: spec for spec in specs}


@dataclass(frozen=True)
class StageConfig:
    stage: int
    epochs: int
    batch_size: int
    learning_rate: float
    adapter_enabled: bool


STAGE_CONFIGS = {
    1: StageConfig(stage=1, epochs=3, batch_size=32, learning_rate=1e-3, adapter_enabled=False),
    2: StageConfig(stage=2, epochs=3, batch_size=8, learning_rate=2e-5, adapter_enabled=True),
}


def stage_hyperparams(stage: int) -> StageConfig:
    if stage not in STAGE_CONFIGS:
        raise ManifestError(f"unknown stage {stage}; expected 1 or 2")
    return STAGE_CONFIGS[stage]


@dataclass(frozen=True)
class AdapterConfig:
    """Low-rank adapter settings. All fields are deliberately required:
    silently defaulted adapter shapes have burned enough runs already."""

    rank: int
    alpha: float
    dropout: float
    target_modules: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.rank <= 0:
            raise ManifestError("adapter rank must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ManifestError("adapter dropout must be in [0, 1)")
        if not self.target_modules:
            raise ManifestError("adapter target_modules must be non-empty")


# Adapter hyperparameters have no published values; the manifest carries the
# slots as nulls the run owner must fill before training.
ADAPTER_FIELDS = ("rank", "alpha", "dropout", "target_modules")


def build_label_mask(
    n_visual: int,
    n_instruction: int,
    response_tokens: Sequence[int],
) -> list[int]:
    """Labels for one training example.

    Visual and instruction positions are ignored by the loss; response
    tokens are supervised as themselves.
    """
    if n_visual < 0 or n_instruction < 0:
        raise ManifestError("position counts must be non-negative")
    if not response_tokens:
        raise ManifestError("response must contribute at least one token")
    return [IGNORE_INDEX] * (n_visual + n_instruction) + list(response_tokens)


def format_param_count(n: int) -> str:
    if n >= 1_000_000_000:
        return f"{n / 1e9:.3f}B"
    return f"{round(n / 1e6)}M"


def build_manifest(
    architecture: str | ArchitectureSpec,
    adapter: AdapterConfig | None = None,
    notes: str | None = None,
) -> dict[str, Any]:
    """Assemble the JSON-ready manifest for a full two-stage run.

    One document covers both stages: the component table with per-stage
    roles, the stage schedule table, and the label-mask sentinel. Adapter
    settings are emitted as nulls unless provided; a harness must refuse
    to start stage 2 while any is null.
    """
    if isinstance(architecture, str):
        specs = builtin_architectures()
        if architecture not in specs:
            raise ManifestError(
                f"unknown architecture {architecture!r}; "
                f"known: {', '.join(sorted(specs))}"
            )
        architecture = specs[architecture]
    manifest: dict[str, Any] = {
        "architecture": architecture.name,
        "total_param_count": architecture.component_total,
        "declared_total_param_count": architecture.declared_total,
        "components": [
            {
                "name": c.name,
                "param_count": c.param_count,
                "roles": {str(stage): c.role(stage) for stage in STAGES},
            }
            for c in architecture.components
        ],
        "stages": [
            {
                "stage": cfg.stage,
                "epochs": cfg.epochs,
                "batch_size": cfg.batch_size,
                "learning_rate": cfg.learning_rate,
                "adapter_enabled": cfg.adapter_enabled,
            }
            for cfg in (STAGE_CONFIGS[1], STAGE_CONFIGS[2])
        ],
        "adapter": {name: None for name in ADAPTER_FIELDS}
        if adapter is None
        else {
            "rank": adapter.rank,
            "alpha": adapter.alpha,
            "dropout": adapter.dropout,
            "target_modules": list(adapter.target_modules),
        },
        "ignore_index": IGNORE_INDEX,
    }
    if notes:
        manifest["notes"] = notes
    return manifest
