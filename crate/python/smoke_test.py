"""Smoke test for the yoco_aug extension module.

Build and install first:
    maturin build --release -m crates/python/Cargo.toml -o dist
    pip install dist/yoco_aug-*.whl
"""

import random

import yoco_aug


def noise(h, w, seed):
    rng = random.Random(seed)
    return yoco_aug.Image(3, h, w, [rng.random() for _ in range(3 * h * w)])


def main():
    img = noise(8, 8, 0)
    top, bottom = yoco_aug.cut(img, "height", 3)
    assert top.shape == (3, 3, 8) and bottom.shape == (3, 5, 8)
    assert yoco_aug.concat(top, bottom, "height") == img

    flip = yoco_aug.Pipeline.from_config(
        '[yoco]\n[[ops]]\nkind = "hflip"\nprobability = 0.5\n'
    )
    assert flip.op_names == ["horizontal_flip"] and flip.yoco_enabled
    root = yoco_aug.RngStream(7)
    counts = {}
    for i in range(2000):
        out = yoco_aug.yoco_apply_with_cut(img, flip, "width", 4, root.split(i))
        kind = yoco_aug.classify_outcome(img, out, "width", 4)
        counts[kind] = counts.get(kind, 0) + 1
    assert abs(counts["partially_augmented"] / 2000 - 0.5) < 0.05, counts

    # Manual composition with the same child streams gives the same result.
    plain = yoco_aug.Pipeline.from_config('[[ops]]\nkind = "hflip"\nprobability = 0.5\n')
    stream = yoco_aug.RngStream(3)
    left, right = yoco_aug.cut(img, "width", 4)
    manual = yoco_aug.concat(
        plain.augment_image(left, stream.split(0)),
        plain.augment_image(right, stream.split(1)),
        "width",
    )
    assert yoco_aug.yoco_apply_with_cut(img, plain, "width", 4, stream) == manual

    mix = yoco_aug.Pipeline.from_config('[yoco]\n[[ops]]\nkind = "cutmix"\n')
    label = [1.0, 0.0]
    out, weights = mix.apply(img, label, yoco_aug.RngStream(1), (noise(8, 8, 1), [0.0, 1.0]))
    assert out.shape == img.shape and abs(sum(weights) - 1.0) < 1e-9

    assert yoco_aug.blur_kernel_shape(32, 32) == (3, 3)
    assert yoco_aug.blur_kernel_shape(16, 32) == (1, 3)
    assert len(yoco_aug.crop4(yoco_aug.Image.from_bytes(1, 512, 512, bytes(512 * 512)))) == 4
    rms = yoco_aug.rms_calibration_error([0.9] * 4, [True, False, True, False], bins=1)
    assert f"{rms:.4f}" == "0.4000"

    try:
        yoco_aug.Pipeline.from_config('[[ops]]\nkind = "mixup"\n[[ops]]\nkind = "hflip"\n')
    except ValueError as e:
        assert "last" in str(e)
    else:
        raise AssertionError("mix op not last was accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
