"""
How four votes become one
=========================
"""
from upm.ensemble import AVERAGE, MAJORITY, combine

members = {"cart": (0.9, 0.1), "rtree": (0.6, 0.4), "forest": (0.4, 0.6), "kstar": (0.3, 0.7)}

# averaging: the mean distribution is (0.55, 0.45), so Placed
avg = combine(members, AVERAGE)
print(avg.class_name, avg.distribution)

# counting votes gives a 2-2 split, which goes to the class with the higher
# mean probability, and only then to the training majority
vote = combine(members, MAJORITY, tie_fallback=1)
print(vote.class_name, vote.distribution, vote.tie_break)

even = {"cart": (0.7, 0.3), "rtree": (0.3, 0.7), "forest": (0.6, 0.4), "kstar": (0.4, 0.6)}
print(combine(even, MAJORITY, tie_fallback=1).tie_break)
