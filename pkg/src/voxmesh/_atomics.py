"""LLVM atomic intrinsics for numba kernels.

Numba's CPU target does not expose atomics, so the claim table and shared
counters used by the speculative refiner are built on raw llvmlite
``cmpxchg`` / ``atomicrmw`` instructions. Orderings are acquire/release:
a successful claim acquires, a release publishes all mutations made while
the claim was held (the commit protocol relies on this).
"""

from numba import types
from numba.core import cgutils
from numba.extending import intrinsic


@intrinsic
def cas_i32(typingctx, arr, idx, expected, desired):
    """Compare-and-swap on ``arr[idx]`` (int32). Returns the observed value."""
    if not (isinstance(arr, types.Array) and arr.dtype == types.int32):
        return None
    sig = types.int32(arr, types.int64, types.int32, types.int32)

    def codegen(context, builder, signature, args):
        arr_v, idx_v, exp_v, des_v = args
        ary = context.make_array(signature.args[0])(context, builder, arr_v)
        ptr = cgutils.get_item_pointer(
            context, builder, signature.args[0], ary, [idx_v]
        )
        pair = builder.cmpxchg(
            ptr, exp_v, des_v, ordering="acq_rel", failordering="acquire"
        )
        return builder.extract_value(pair, 0)

    return sig, codegen


@intrinsic
def xchg_i32(typingctx, arr, idx, value):
    """Atomic exchange on ``arr[idx]`` (int32) with release ordering."""
    if not (isinstance(arr, types.Array) and arr.dtype == types.int32):
        return None
    sig = types.int32(arr, types.int64, types.int32)

    def codegen(context, builder, signature, args):
        arr_v, idx_v, val_v = args
        ary = context.make_array(signature.args[0])(context, builder, arr_v)
        ptr = cgutils.get_item_pointer(
            context, builder, signature.args[0], ary, [idx_v]
        )
        return builder.atomic_rmw("xchg", ptr, val_v, ordering="release")

    return sig, codegen


@intrinsic
def fetch_add_i64(typingctx, arr, idx, value):
    """Atomic fetch-and-add on ``arr[idx]`` (int64). Returns the old value."""
    if not (isinstance(arr, types.Array) and arr.dtype == types.int64):
        return None
    sig = types.int64(arr, types.int64, types.int64)

    def codegen(context, builder, signature, args):
        arr_v, idx_v, val_v = args
        ary = context.make_array(signature.args[0])(context, builder, arr_v)
        ptr = cgutils.get_item_pointer(
            context, builder, signature.args[0], ary, [idx_v]
        )
        return builder.atomic_rmw("add", ptr, val_v, ordering="acq_rel")

    return sig, codegen
