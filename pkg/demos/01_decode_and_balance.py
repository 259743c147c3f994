"""
Genotypes, mixing ratios and balanced sets
==========================================

A 12-bit genotype holds three 4-bit weights, one per synthetic pool.
Normalizing the weights gives the share of synthetic rows drawn from
each pool when the minority class is topped up to a 1:1 balance.
"""

import numpy as np

from mixbalance.data import DEFAULT_SCHEMA, FeatureDataset
from mixbalance.ga import (MixRatio, assemble_balanced_set, decode_genotype, largest_remainder,
                           ratio_key, str_to_bits)
from mixbalance.generators import SyntheticPool

# weights 6, 0, 1 -> shares 6/7, 0, 1/7
g = str_to_bits("0110 0000 0001")
print("decoded:", decode_genotype(g))

# many genotypes share a ratio: 0001 0001 0001 and 0010 0010 0010 both mean 1:1:1
print("same key:", ratio_key(str_to_bits("000100010001")) == ratio_key(str_to_bits("001000100010")))

# how many distinct ratios can 12 bits express?
every = np.array(np.meshgrid(*[[0, 1]] * 12)).reshape(12, -1).T
print("distinct ratios:", len({ratio_key(b) for b in every}))

# apportioning 10 synthetic rows evenly leaves one spare row, which goes to pool 1
print("10 rows at 1:1:1 ->", largest_remainder(MixRatio.from_weights([1, 1, 1]), 10))

# a toy training set: 5 failures, 40 healthy drives
rng = np.random.default_rng(0)
train = FeatureDataset(rng.uniform(-1, 1, (45, 11)), np.r_[np.ones(5), np.zeros(40)],
                       DEFAULT_SCHEMA)
pools = [SyntheticPool(rng.uniform(-1, 1, (100, 11)), "external", f"toy pool {i}")
         for i in range(3)]
balanced = assemble_balanced_set(train, pools, decode_genotype(g), seed=1)
print("balanced:", balanced.n_positive, "positives,", balanced.n_negative, "negatives")
print("synthetic rows carry negative ids:", balanced.ids[-3:])
