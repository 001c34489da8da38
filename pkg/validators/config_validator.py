"""
ConfigValidator - Validador de ficheros de configuración JSON de la CLI.
"""
import json
import logging
from typing import Any, Dict, Iterable, Optional

logger = logging.getLogger(__name__)


class ConfigValidator:
    """Comprueba que un fichero de configuración solo use claves conocidas."""

    def __init__(self, allowed_keys: Optional[Iterable[str]] = None):
        self.allowed_keys = set(allowed_keys or [])

    @staticmethod
    def load(path: str) -> Dict[str, Any]:
        """Lee un objeto JSON; cualquier otro contenido es un error."""
        try:
            with open(path) as handle:
                data = json.load(handle)
        except OSError as e:
            logger.error(f"❌ No se pudo leer la configuración {path}: {e}")
            raise ValueError(f"No se pudo leer la configuración {path}: {e}") from e
        except json.JSONDecodeError as e:
            logger.error(f"❌ JSON inválido en {path}: {e}")
            raise ValueError(f"JSON inválido en {path}: {e}") from e

        if not isinstance(data, dict):
            raise ValueError(f"La configuración {path} debe ser un objeto JSON")
        return data

    def validate(self, config: Dict[str, Any], allowed_keys: Optional[Iterable[str]] = None) -> Dict[str, Any]:
        """Devuelve la configuración con los guiones normalizados; claves desconocidas ⇒ ValueError."""
        allowed = set(allowed_keys) if allowed_keys is not None else self.allowed_keys
        normalized = {str(key).replace('-', '_'): value for key, value in config.items()}

        unknown = sorted(set(normalized) - allowed)
        if unknown:
            logger.error(f"❌ Claves desconocidas en la configuración: {unknown}")
            raise ValueError(f"Claves desconocidas en la configuración: {', '.join(unknown)}")
        return normalized

    def load_and_validate(self, path: str, allowed_keys: Optional[Iterable[str]] = None) -> Dict[str, Any]:
        return self.validate(self.load(path), allowed_keys)
