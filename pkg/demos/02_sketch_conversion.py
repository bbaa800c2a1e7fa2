"""
Keyframe-to-sketch conversion
=============================

The sketch chain is grayscale -> invert -> 3x3 erosion -> color-dodge.
Here we run it on a synthetic keyframe and save every intermediate stage.
"""

import numpy as np

from sketchboard import Frame, SketchConfig, sketchify_stages
from sketchboard.frames import save_gray_png

############################################################
# Paint a simple scene: bright sky, dark ground, a disc "sun"

h, w = 120, 160
pixels = np.zeros((h, w, 3), dtype=np.uint8)
pixels[: h // 2] = (180, 200, 240)
pixels[h // 2 :] = (60, 120, 60)
yy, xx = np.mgrid[0:h, 0:w]
sun = (yy - 25) ** 2 + (xx - 120) ** 2 < 15**2
pixels[sun] = (250, 220, 90)
frame = Frame(pixels=pixels)

############################################################
# Run the conversion and keep the intermediates

stages = sketchify_stages(frame, SketchConfig(epsilon=1.0))

for name in ("gray", "inverted", "eroded", "sketch"):
    image = getattr(stages, name)
    save_gray_png(image, f"stage_{name}.png")
    print(f"stage_{name}.png  mean={image.values.mean():6.1f}")

############################################################
# Flat regions dodge to near-white; object boundaries keep dark lines

sketch = stages.sketch.values
print("sky region value:", sketch[10, 10])
print("boundary minimum:", sketch[h // 2 - 2 : h // 2 + 2].min())
assert sketch[10, 10] > 200
