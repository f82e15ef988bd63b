from ._tomo import *  # noqa: F401,F403
from ._tomo import ConfigError, TomoError  # noqa: F401
