"""
The noise-free toy: no mapping hides from two channels
======================================================

Two codewords collide under exactly one channel value. With two candidate
channels some channel always sees many distinct images, whatever mapping
user 2 picks.
"""

from aisets import min_max_images, toy_distinct_images

rep = toy_distinct_images([(0, 2), (1, 1), (2, 0)], [1, 2])
print("image counts:", {str(G): c for G, c in rep.counts.items()})
print("classes split under the other channel:", rep.separated)

res = min_max_images(range(9), range(9), [1, 2])
print(f"best mapping still shows {res.value} images (search nodes: {res.nodes})")
print("witness mapping x2(x1):", res.witness)
