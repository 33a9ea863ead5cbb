"""Hot numeric kernels with a selectable backend.

The default backend jits the kernels with numba; setting the environment
variable CELLEDGE_BACKEND=numpy selects the pure-numpy fallback (the same
fallback is used automatically when numba is not importable). Both
backends implement identical signatures and agree to rounding error;
`celledge bench` compares their throughput.
"""

import os
import warnings

_REQUESTED = os.environ.get("CELLEDGE_BACKEND", "").strip().lower()

if _REQUESTED not in ("", "numba", "numpy"):
    raise RuntimeError(f"CELLEDGE_BACKEND must be 'numba' or 'numpy', got {_REQUESTED!r}")

if _REQUESTED == "numpy":
    from . import _numpy_impl as _impl
else:
    try:
        from . import _numba_impl as _impl
    except ImportError as err:
        if _REQUESTED == "numba":
            raise
        warnings.warn(f"numba unavailable ({err}); falling back to the numpy backend")
        from . import _numpy_impl as _impl

BACKEND = _impl.BACKEND

bf_true_rates = _impl.bf_true_rates
bf_chi_opt = _impl.bf_chi_opt
bf_aux_prelog = _impl.bf_aux_prelog
bf_aux_grad = _impl.bf_aux_grad
bf_mmse_receivers = _impl.bf_mmse_receivers
bf_mse_values = _impl.bf_mse_values
bf_mse_grad = _impl.bf_mse_grad
pc_sinr = _impl.pc_sinr
pc_qft_grad = _impl.pc_qft_grad
pc_lft_grad = _impl.pc_lft_grad

KERNEL_NAMES = [
    "bf_true_rates", "bf_chi_opt", "bf_aux_prelog", "bf_aux_grad",
    "bf_mmse_receivers", "bf_mse_values", "bf_mse_grad",
    "pc_sinr", "pc_qft_grad", "pc_lft_grad",
]
