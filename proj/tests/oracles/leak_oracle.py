"""Monte-Carlo check of the context-free keyword matcher's expected accuracy.

An item leaks its answer keyword into the question with probability lam. A
matcher that sees only question and options answers leaked items correctly
and guesses uniformly among n options otherwise.
"""
import random


def simulate(lam, n, trials=200_000, seed=7):
    rng = random.Random(seed)
    hits = 0
    for _ in range(trials):
        gold = rng.randrange(n)
        if rng.random() < lam:
            hits += 1
        else:
            hits += rng.randrange(n) == gold
    return hits / trials


if __name__ == "__main__":
    for lam in (0.0, 0.5, 1.0):
        for n in (2, 3, 4):
            print(f"lam={lam} n={n} mc={simulate(lam, n):.4f} closed={lam + (1 - lam) / n:.4f}")
