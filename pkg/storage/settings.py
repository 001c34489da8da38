import os
import logging
from typing import Any, Dict, List, Optional

from dotenv import load_dotenv

# Configurar variables de entorno
load_dotenv()

# Configuremos logging
logging.basicConfig(
    level=getattr(logging, os.getenv('LOG_LEVEL', 'INFO').upper(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
)
logger = logging.getLogger(__name__)


class Settings():

    # Clase singleton con la configuración de la aplicación.
    # Se lee una sola vez del entorno (.env incluido).

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super(Settings, cls).__new__(cls)
            cls._instance._initialize()
        return cls._instance

    def _initialize(self):

        self.config = {
            'log_level': os.getenv('LOG_LEVEL', 'INFO').upper(),
            'seed_base': int(os.getenv('MALINIT_SEED', 42)),
            'seed_count': int(os.getenv('MALINIT_SEED_COUNT', 50)),
            'output_dir': os.getenv('MALINIT_OUTPUT_DIR', './runs'),
            'jobs': int(os.getenv('MALINIT_JOBS', 1)),
        }
        logger.debug("Configuración inicializada")

    @classmethod
    def reset(cls):
        """Descarta la instancia para releer el entorno (usado en pruebas)."""
        cls._instance = None

    def get(self, key: str, default: Any = None) -> Any:
        return self.config.get(key, default)

    def default_seeds(self, count: Optional[int] = None) -> List[int]:
        """Lista fija de semillas: base, base+1, ... (MALINIT_SEED desplaza la base)."""
        count = count if count is not None else self.config['seed_count']
        base = self.config['seed_base']
        return [base + i for i in range(count)]

    def set_verbosity(self, verbose: int = 0, quiet: bool = False):
        # Ajusta el nivel del logger raíz desde la CLI
        if quiet:
            level = logging.WARNING
        elif verbose > 0:
            level = logging.DEBUG
        else:
            level = getattr(logging, self.config['log_level'], logging.INFO)
        logging.getLogger().setLevel(level)

    def to_dict(self) -> Dict[str, Any]:
        return dict(self.config)
