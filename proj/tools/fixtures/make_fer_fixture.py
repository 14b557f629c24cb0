#!/usr/bin/env python3
# Copyright 2026 The fer Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.
"""Writes the synthetic 100-row FER2013 / FER+ fixture pair.

The real datasets are not redistributable, so the fixture carries cartoon
faces with a class-dependent mouth/brow shape plus noise. Schema and row
alignment match the published files exactly.

    python3 tools/fixtures/make_fer_fixture.py fixtures/
"""

import os
import sys

import numpy as np

EMOTIONS = ["neutral", "happiness", "surprise", "sadness", "anger",
            "disgust", "fear", "contempt"]
# FER2013 7-way code for each FER+ emotion (contempt has none; use Neutral).
TO_FER7 = [6, 3, 5, 4, 0, 1, 2, 6]

ROWS = 100
# Rows with hand-placed vote patterns that exercise the merge rules.
NOT_A_FACE = {7, 85}
UNKNOWN_MAX = {19}
ALL_ZERO = {33}
WEAK_WINNER = {52}
TIE_NEUTRAL_HAPPY = {61}


def usage(i):
    if i < 80:
        return "Training"
    if i < 90:
        return "PublicTest"
    return "PrivateTest"


def draw_face(label, rng):
    yy, xx = np.mgrid[0:48, 0:48].astype(np.float64)
    img = 60.0 + 40.0 * (yy / 47.0)
    cx = 24 + rng.integers(-2, 3)
    cy = 24 + rng.integers(-2, 3)
    face = ((xx - cx) / 17.0) ** 2 + ((yy - cy) / 21.0) ** 2 <= 1.0
    img[face] = 160.0 + rng.normal(0, 5)

    eye_r = 3.2 if label in (2, 6) else 2.2
    for ex in (cx - 7, cx + 7):
        eye = (xx - ex) ** 2 + (yy - (cy - 5)) ** 2 <= eye_r ** 2
        img[eye] = 40.0

    # brows: slant inward for anger, raised for surprise/fear
    for side in (-1, 1):
        bx = cx + side * 7
        by = cy - 10 - (2 if label in (2, 6) else 0)
        for dx in range(-3, 4):
            slope = 0.6 * side * dx if label == 4 else 0.0
            y = int(round(by + slope))
            if 0 <= y < 48:
                img[y, bx + dx] = 50.0

    mx = np.arange(-7, 8)
    if label == 0:
        my = np.zeros_like(mx, dtype=np.float64)
    elif label == 1:
        my = 2.0 - 0.08 * mx ** 2
    elif label == 3:
        my = 0.08 * mx ** 2 - 2.0
    elif label == 5:
        my = 1.5 * np.sin(mx * 0.9)
    elif label == 7:
        my = np.where(mx > 0, -0.4 * mx, 0.0)
    else:
        my = np.zeros_like(mx, dtype=np.float64)
    for dx, dy in zip(mx, my):
        y = int(round(cy + 9 + dy))
        img[y, cx + dx] = 30.0
    if label in (2, 6):
        mouth = ((xx - cx) / 3.0) ** 2 + ((yy - (cy + 10)) / 4.0) ** 2 <= 1.0
        img[mouth] = 25.0

    img += rng.normal(0, 12.0, size=img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.int64)


def votes_for(i, label, rng):
    v = np.zeros(10, dtype=np.int64)
    if i in NOT_A_FACE:
        v[9] = 9
        v[0] = 1
    elif i in UNKNOWN_MAX:
        v[8] = 6
        v[1] = 4
    elif i in ALL_ZERO:
        pass
    elif i in WEAK_WINNER:
        v[0] = 2
        v[1] = 1
        v[3] = 1
    elif i in TIE_NEUTRAL_HAPPY:
        v[0] = 5
        v[1] = 5
    else:
        win = int(rng.integers(6, 11))
        v[label] = win
        rest = 10 - win
        for _ in range(rest):
            j = int(rng.integers(0, 8))
            if j == label:
                j = 8
            v[j] += 1
        # keep the intended emotion the strict winner
        others = [k for k in range(10) if k != label]
        if max(v[k] for k in others) >= v[label]:
            v[label] = max(v[k] for k in others) + 1
    return v


def main(out_dir):
    rng = np.random.default_rng(2013)
    probs = np.array([0.25, 0.25, 0.12, 0.12, 0.10, 0.04, 0.07, 0.05])
    fer_rows = []
    plus_rows = []
    for i in range(ROWS):
        label = int(rng.choice(8, p=probs))
        if i in TIE_NEUTRAL_HAPPY:
            label = 0
        pixels = draw_face(label, rng)
        fer_rows.append("%d,%s,%s" % (TO_FER7[label],
                                      " ".join(str(p) for p in pixels.ravel()),
                                      usage(i)))
        votes = votes_for(i, label, rng)
        name = "" if i in NOT_A_FACE else "fer%07d.png" % i
        plus_rows.append("%s,%s,%s" % (usage(i), name,
                                       ",".join(str(c) for c in votes)))

    with open(os.path.join(out_dir, "fer2013.csv"), "w", newline="\n") as f:
        f.write("emotion,pixels,Usage\n")
        f.write("\n".join(fer_rows) + "\n")
    with open(os.path.join(out_dir, "fer2013new.csv"), "w", newline="\n") as f:
        f.write("Usage,Image name,neutral,happiness,surprise,sadness,anger,"
                "disgust,fear,contempt,unknown,NF\n")
        f.write("\n".join(plus_rows) + "\n")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "fixtures")
