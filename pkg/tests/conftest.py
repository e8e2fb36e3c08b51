import numpy as np
import pytest

from segkit.data import ClassEntry, ClassTable, ImageFrame, ImageRecord, InstanceMask, Manifest
from segkit.synth import SynthConfig, synth_generate


@pytest.fixture
def small_table():
    return ClassTable(
        [
            ClassEntry("Mug", "pickupable", "small"),
            ClassEntry("Sofa", "receptacle", "large"),
            ClassEntry("Fridge", "openable", "large"),
        ]
    )


def make_frame(image_id="img0", side=16, color=(100, 120, 140)):
    pixels = np.zeros((side, side, 3), dtype=np.uint8)
    pixels[:] = color
    return ImageFrame(image_id, pixels)


def make_mask(side=16, box=(2, 2, 8, 8), label="Mug", instance_id="i0"):
    mask = np.zeros((side, side), dtype=bool)
    y0, x0, y1, x1 = box
    mask[y0:y1, x0:x1] = True
    return InstanceMask(mask, label, instance_id)


@pytest.fixture
def tiny_manifest(small_table):
    frame = make_frame()
    frame.pixels[2:8, 2:8] = (230, 0, 0)
    masks = [make_mask()]
    return Manifest([ImageRecord(frame, masks)], small_table)


@pytest.fixture(scope="session")
def synth_manifest():
    return synth_generate(SynthConfig(num_images=6, canvas=64, seed=5))
