# Copyright 2026 The pairdist Authors.
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

"""Converts torchvision's VGG-19 weights into a pairdist tensor archive.

Usage: python3 tools/export_vgg19.py OUT.bin [--state-dict vgg19.pth]

Without --state-dict the ImageNet weights are fetched through torchvision.
"""

import argparse
import struct
import zlib

import torch

MAGIC = b"PDTA0001"
BLOCKS = [2, 2, 4, 4, 4]  # convolutions per VGG-19 block


def conv_names():
    for b, n in enumerate(BLOCKS, start=1):
        for j in range(1, n + 1):
            yield f"block{b}_conv{j}"


def encode(tensors):
    out = bytearray(MAGIC)
    out += struct.pack("<I", len(tensors))
    for name, t in tensors:
        t = t.detach().to(torch.float32).contiguous()
        raw = name.encode()
        out += struct.pack("<I", len(raw)) + raw
        out += struct.pack("<BI", 0, t.dim())
        out += b"".join(struct.pack("<q", d) for d in t.shape)
        out += t.numpy().tobytes()
    out += struct.pack("<I", zlib.crc32(bytes(out)) & 0xFFFFFFFF)
    return bytes(out)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("out")
    ap.add_argument("--state-dict", help="torchvision vgg19 state dict (.pth)")
    args = ap.parse_args()

    if args.state_dict:
        sd = torch.load(args.state_dict, map_location="cpu")
    else:
        import torchvision

        sd = torchvision.models.vgg19(weights="IMAGENET1K_V1").state_dict()

    conv_keys = sorted(
        {k.rsplit(".", 1)[0] for k in sd if k.startswith("features.") and sd[k].dim() == 4},
        key=lambda k: int(k.split(".")[1]),
    )
    names = list(conv_names())
    if len(conv_keys) != len(names):
        raise SystemExit(f"expected {len(names)} conv layers, found {len(conv_keys)}")
    tensors = []
    for name, key in zip(names, conv_keys):
        tensors.append((f"{name}.weight", sd[f"{key}.weight"]))
        tensors.append((f"{name}.bias", sd[f"{key}.bias"]))
    with open(args.out, "wb") as f:
        f.write(encode(tensors))


if __name__ == "__main__":
    main()
