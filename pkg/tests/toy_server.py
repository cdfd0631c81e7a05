"""Minimal stdio wire-protocol server for exercising the client.

Serves a seeded random ToyVictim. Fault flags let tests hit every
client-side error path:
  --wrong-id      echo id+1 in responses
  --short-scores  drop the last score
  --stall         never answer score requests
  --refuse        refuse the handshake
"""

import sys

import numpy as np

from cfgpatch import wire
from cfgpatch.victim import ToyVictim, toy_score


def main(argv):
    seed = int(argv[argv.index("--seed") + 1]) if "--seed" in argv else 0
    classes = int(argv[argv.index("--classes") + 1]) if "--classes" in argv else 4
    victim = ToyVictim.random(seed, classes)

    out = sys.stdout.buffer
    for raw in sys.stdin.buffer:
        msg = wire.decode_message(raw)
        if "hello" in msg:
            if "--refuse" in argv:
                out.write(wire.encode_message(
                    wire.error_response("refusing handshake")))
                out.flush()
                return
            out.write(wire.encode_message(
                wire.ready_message(classes, ["vis", "ir"], False)))
            out.flush()
            continue
        if "--stall" in argv:
            continue
        image, modality, request_id = wire.image_from_request(msg)
        scores = toy_score(np.asarray(image), modality, victim)
        if "--short-scores" in argv:
            scores = scores[:-1]
        if "--wrong-id" in argv:
            request_id += 1
        out.write(wire.encode_message(wire.score_response(request_id, scores)))
        out.flush()


if __name__ == "__main__":
    main(sys.argv[1:])
