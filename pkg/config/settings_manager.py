
import os
from typing import Union
from dotenv import load_dotenv

# Load the environment variables from the .env file, if present
load_dotenv()

keys = [
    'TOLLGRID_THREADS',
    'TOLLGRID_PROFILE',
    'SOLVER_CONFIG_FILE',
    'LOGGING_LEVEL',
    'LOGGING_FOLDER_PATH',
    'LOGGING_FILE_NAME',
]

KEYS_DICTIONARY = {}


def get_key(key: str) -> Union[str | None]:
    """
        Retrieves the value of a registered key from the environment, or None when it is not set.
    """
    if key not in keys:
        raise ValueError(
            f'Key {key} is not registered in the list of settings manager keys. Register key to fetch its value')

    if key in KEYS_DICTIONARY:
        return KEYS_DICTIONARY[key]

    key_value = os.getenv(key)
    if key_value is not None and key_value.strip() != "":
        KEYS_DICTIONARY[key] = key_value.strip()
        return KEYS_DICTIONARY[key]
    return None


def reset_cache() -> None:
    """
        Forgets cached values so the next lookup re-reads the environment.
    """
    KEYS_DICTIONARY.clear()


def get_thread_count() -> int:
    """
        Resolves TOLLGRID_THREADS into a worker count; 0 or unset means one worker per CPU.
    """
    raw_value = get_key('TOLLGRID_THREADS')
    if raw_value is None:
        return os.cpu_count() or 1
    try:
        threads = int(raw_value)
    except ValueError as exception:
        raise ValueError(f"TOLLGRID_THREADS must be an integer, got '{raw_value}'") from exception
    if threads < 0:
        raise ValueError(f"TOLLGRID_THREADS must be >= 0, got {threads}")
    if threads == 0:
        return os.cpu_count() or 1
    return threads
