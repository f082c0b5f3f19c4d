"""Tour of the resizable counter array.

Counters start at 8 bits. When one needs to represent a value beyond its
width, it merges with its aligned neighbor block and doubles in width:
6 merges right into <6,7>, <6,7> merges left into <4..7>, and so on. One
merge bit per slot encodes the whole layout.
"""

import numpy as np

from mergesketch import MergePolicy, SlotArray

arr = SlotArray(w=8, s=8)
print("fresh array: 8 slots of 8 bits,", arr.bit_footprint(), "bits total")
print()

arr.write_unsigned(arr.locate(6), 250)
arr.write_unsigned(arr.locate(7), 3)
print("slot 6 holds 250, slot 7 holds 3")

ref = arr.add_unsigned(6, 10, MergePolicy.SUM)
print(f"adding 10 at slot 6 overflows 8 bits -> counter {ref.offset}.."
      f"{ref.offset + (1 << ref.level) - 1} now {ref.width} bits wide, "
      f"value {arr.read_unsigned(ref)} (sum merge)")

ref = arr.add_unsigned(6, 70_000, MergePolicy.SUM)
print(f"adding 70000 overflows 16 bits -> {ref.width}-bit counter at "
      f"offset {ref.offset}, value {arr.read_unsigned(ref)}")

print("\nlive counters:")
for ref, value in arr.counters():
    span = f"<{ref.offset}..{ref.offset + (1 << ref.level) - 1}>"
    print(f"  {span:8s} level {ref.level}  {ref.width:2d} bits  value {value}")

print("\nmerge bitmap:", np.binary_repr(int(arr.merge_bits[0]), width=8)[::-1],
      "(bit j marks slot j's block as merged)")

# max merging keeps the largest constituent instead of the sum
m = SlotArray(w=8, s=8)
m.write_unsigned(m.locate(2), 200)
m.write_unsigned(m.locate(3), 90)
ref = m.add_unsigned(2, 100, MergePolicy.MAX)
print(f"\nmax merge of (200, 90) then +100 -> {m.read_unsigned(ref)}")

# downsampling halves every counter in place (for the sampled-counter hybrid);
# a max-merged counter whose halved value fits half the width can split back
m.scale_down_all("deterministic")
print(f"after halving: {m.read_unsigned(m.locate(2))}")
c1, c2 = m.split(m.locate(2), MergePolicy.MAX)
print(f"split restores two 8-bit counters: {m.read_unsigned(c1)}, "
      f"{m.read_unsigned(c2)}")

arr.scale_down_all("deterministic")
print("\nfirst array after deterministic halving:",
      [v for _, v in arr.counters()])

blob = arr.to_bytes()
print(f"snapshot: {len(blob)} bytes, round-trips bit-exactly:",
      SlotArray.from_bytes(blob).to_bytes() == blob)
