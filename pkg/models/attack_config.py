from typing import Optional, Dict, Any


class AttackConfig:
    """Clase que representa la configuración de un ataque de inicialización."""

    # Tipos de ataque
    KINDS = ['soft_knockout', 'shift', 'conv_soft_knockout', 'conv_shift', 'scale_weights', 'variance_swap']

    # Ataques que solo permutan (conservan el multiconjunto de componentes)
    PERMUTATION_KINDS = ['soft_knockout', 'shift', 'conv_soft_knockout', 'conv_shift']

    PLACEMENTS = ['stable', 'shuffled']

    ALIASES = {
        'softknockout': 'soft_knockout', 'soft': 'soft_knockout',
        'convsoftknockout': 'conv_soft_knockout', 'convshift': 'conv_shift',
        'scale': 'scale_weights', 'scaleweights': 'scale_weights',
        'varianceswap': 'variance_swap',
    }

    def __init__(
        self,
        kind: str = "soft_knockout",
        r: float = 0.5,
        s: int = 0,
        attacked_filters: int = 1,
        scale_factor: float = 1.0,
        placement: str = "stable",
        placement_seed: Optional[int] = None,
        start_parity: bool = False
    ):
        key = (kind or "").lower().replace('-', '_')
        self.kind = self.ALIASES.get(key.replace('_', ''), key)
        self.r = float(r)
        self.s = int(s)
        self.attacked_filters = int(attacked_filters)
        self.scale_factor = float(scale_factor)
        self.placement = (placement or "").lower()
        self.placement_seed = placement_seed
        self.start_parity = bool(start_parity)

        self._validate()

    def _validate(self):
        """Valida la configuración del ataque."""
        if self.kind not in self.KINDS:
            raise ValueError(f"Tipo de ataque inválido. Debe ser: {', '.join(self.KINDS)}")

        if not 0.0 <= self.r <= 1.0:
            raise ValueError("El parámetro r debe estar en [0, 1]")

        if self.s < 0:
            raise ValueError("El desplazamiento s no puede ser negativo")

        if self.attacked_filters < 1:
            raise ValueError("El número de filtros atacados debe ser positivo")

        if self.scale_factor <= 0:
            raise ValueError("El factor de escala debe ser positivo")

        if self.placement not in self.PLACEMENTS:
            raise ValueError(f"Colocación inválida. Debe ser: {', '.join(self.PLACEMENTS)}")

        if self.placement == 'shuffled' and self.placement_seed is None:
            raise ValueError("La colocación 'shuffled' necesita una semilla")

    @property
    def is_permutation(self) -> bool:
        return self.kind in self.PERMUTATION_KINDS

    @property
    def is_conv(self) -> bool:
        return self.kind.startswith('conv_')

    def to_dict(self) -> Dict[str, Any]:
        return {
            'kind': self.kind,
            'r': self.r,
            's': self.s,
            'attacked_filters': self.attacked_filters,
            'scale_factor': self.scale_factor,
            'placement': self.placement,
            'placement_seed': self.placement_seed,
            'start_parity': self.start_parity,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'AttackConfig':
        return cls(
            kind=data.get('kind', 'soft_knockout'),
            r=data.get('r', 0.5),
            s=data.get('s', 0),
            attacked_filters=data.get('attacked_filters', 1),
            scale_factor=data.get('scale_factor', 1.0),
            placement=data.get('placement', 'stable'),
            placement_seed=data.get('placement_seed'),
            start_parity=data.get('start_parity', False)
        )

    def __repr__(self) -> str:
        return f"AttackConfig(kind='{self.kind}', r={self.r}, s={self.s}, placement='{self.placement}')"

    def __str__(self) -> str:
        if self.kind in ('shift', 'conv_shift'):
            return f"{self.kind} (s={self.s})"
        if self.kind == 'scale_weights':
            return f"{self.kind} (x{self.scale_factor})"
        return f"{self.kind} (r={self.r})"


class AttackStream:
    """Recorre los tensores en orden de inicialización alternando 'cross'."""

    def __init__(self, config: AttackConfig):
        self.config = config
        self.cross = config.start_parity
        self.processed = 0
        # Canales que la capa anterior deja desactivados (solo conv)
        self.previous_dead_channels: Optional[int] = None

    def advance(self):
        # Exactamente un cambio de paridad por tensor
        self.cross = not self.cross
        self.processed += 1

    def __repr__(self) -> str:
        return f"AttackStream(kind='{self.config.kind}', cross={self.cross}, processed={self.processed})"
