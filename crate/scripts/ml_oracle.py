"""Reference values for the Mittag-Leffler tests.

Small arguments use the power series at 60 digits; large negative arguments
invert the Laplace transform p^(a-b)/(p^a + y) at t = 1 with Talbot's method.
Prints Rust tuples (a, b, x, value).
"""
import mpmath as mp

mp.mp.dps = 60


def series(a, b, x, terms=None):
    a, b, x = mp.mpf(a), mp.mpf(b), mp.mpf(x)
    s = mp.mpf(0)
    k = 0
    while True:
        t = x**k * mp.rgamma(a * k + b)
        s += t
        k += 1
        if terms is not None:
            if k >= terms:
                return s
        elif k > 20 and abs(t) < mp.mpf(10) ** (-40) * max(abs(s), 1e-30):
            return s


def talbot(a, b, y):
    a, b, y = mp.mpf(a), mp.mpf(b), mp.mpf(y)
    return mp.invertlaplace(lambda p: p ** (a - b) / (p**a + y), 1, method="talbot", degree=200)


def main():
    rows = []
    for a in ["0.3", "0.5", "0.8", "1.2", "1.5"]:
        for b in ["1", a]:
            for x in ["-0.5", "-3", "2", "8"]:
                rows.append((a, b, x, series(a, b, x)))
            for y in ["30", "100", "1000", "10000", "1000000"]:
                rows.append((a, b, "-" + y, talbot(a, b, y)))
    for a, b, x, v in rows:
        if abs(v) > 1e300:
            continue
        print(f"    ({float(a)!r}, {float(b)!r}, {float(x)!r}, {mp.nstr(v, 20)}),")
    print("// 200-term partial sums")
    for a in ["0.5", "0.8", "1.2", "1.5"]:
        for b in ["1", a]:
            for x in ["-5", "-2.5", "2.5", "5"]:
                v = series(a, b, x, terms=200)
                print(f"    ({float(a)!r}, {float(b)!r}, {float(x)!r}, {mp.nstr(v, 20)}),")


if __name__ == "__main__":
    main()
