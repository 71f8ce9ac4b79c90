"""Task implementations; importing this package registers every environment."""

# import order fixes the listing order of the registry
from . import maze  # noqa: F401
from . import sliding  # noqa: F401
from . import patch  # noqa: F401
from . import matchstick  # noqa: F401
from . import image_tasks  # noqa: F401
from . import mr3d  # noqa: F401
