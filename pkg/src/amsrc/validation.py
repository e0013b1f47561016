"""Input validation helpers used at public API boundaries."""


def check_same_shape(a, b, names=("a", "b")):
    if tuple(a.shape) != tuple(b.shape):
        raise ValueError(
            f"shape mismatch: {names[0]} has {tuple(a.shape)}, "
            f"{names[1]} has {tuple(b.shape)}"
        )
