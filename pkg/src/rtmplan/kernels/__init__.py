"""Numeric kernel backend selection.

The compiled extension (``_core``) is preferred when present; otherwise the
pure-numpy twin (``_ref``) is used.  Set ``RTMPLAN_PURE_PYTHON=1`` to force
the fallback, e.g. for benchmarking or debugging.
"""

import os

from . import _ref

if os.environ.get("RTMPLAN_PURE_PYTHON", "") not in ("", "0"):
    _impl = _ref
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _ref

BACKEND = _impl.BACKEND

mass_matrix = _impl.mass_matrix
coriolis_matrix = _impl.coriolis_matrix
gravity_vector = _impl.gravity_vector
mcg = _impl.mcg
potential_energy = _impl.potential_energy
kinetic_energy = _impl.kinetic_energy
inverse_dynamics_batch = _impl.inverse_dynamics_batch
mass_diag_batch = _impl.mass_diag_batch
rk4_chain_table = _impl.rk4_chain_table
rk4_compliance = _impl.rk4_compliance
