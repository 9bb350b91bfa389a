from .capexp import CapExpData, capexp_dual_stage, capexp_model, capexp_process
from .inventory import (InventoryData, inventory_feasibility_set,
                        inventory_model, inventory_process)
from .random_small import random_instance

__all__ = [
    "CapExpData", "InventoryData",
    "capexp_dual_stage", "capexp_model", "capexp_process",
    "inventory_feasibility_set", "inventory_model", "inventory_process",
    "random_instance",
]
