#!/usr/bin/env python3
"""Stream a sensor into the live gateway and watch the clock negotiation.

A simulated keyboard client whose device clock is 250 ms ahead of the
session clock connects over TCP, runs the four-timestamp probe exchange,
ships its events in ordered batches (with one deliberate duplicate), and
says Bye. The gateway's estimate should land within rtt/2 of the truth.
"""

import asyncio
import time

from proctorlab.gateway import Gateway, GatewayConfig, TcpSensorClient
from proctorlab.model import KeyEvent, StreamDescriptor
from proctorlab.protocol import Ack, Bye, Hello, SampleBatch

TRUE_OFFSET_US = -250_000  # device clock runs 250 ms ahead of the session


async def main() -> None:
    gateway = Gateway(GatewayConfig(tcp_port=0, ws_port=None,
                                    session_id="demo-live"))
    await gateway.start()
    epoch_ns = gateway.core._epoch_ns
    print(f"gateway on tcp port {gateway.tcp_port}")

    def device_clock() -> int:
        session_now = (time.monotonic_ns() - epoch_ns) // 1000
        return session_now - TRUE_OFFSET_US

    client = TcpSensorClient("127.0.0.1", gateway.tcp_port)
    await client.connect()
    print(await client.request(Hello(StreamDescriptor("kb", "keyboard", 12.0))))

    await client.run_clock_probes(device_clock, n_probes=8)
    estimate = next(iter(gateway.core.conns.values())).estimate
    print(f"clock estimate: offset {estimate.offset_micros} us "
          f"(true {TRUE_OFFSET_US}), rtt {estimate.rtt_micros} us, "
          f"{estimate.n_probes} probes")
    assert abs(estimate.offset_micros - TRUE_OFFSET_US) <= \
        max(estimate.rtt_micros / 2, 2)

    # three ordered batches; batch 2 is retransmitted and must not duplicate
    for seq in (1, 2, 2, 3):
        base = device_clock()
        events = tuple(KeyEvent(base + i * 2000, "a",
                                "press" if i % 2 == 0 else "release")
                       for i in range(6))
        reply = await client.request(SampleBatch("kb", events, seq))
        assert reply == Ack(seq)
        print(f"batch seq {seq} -> {reply}")
        await asyncio.sleep(0.01)

    print(await client.request(Bye("kb")))
    await client.close()

    session = await gateway.stop()
    kb = session.stream("kb")
    descriptor = session.manifest.streams[0]
    print(f"stored {len(kb)} keyboard events "
          f"(3 batches x 6; the duplicate was ignored)")
    print(f"descriptor carries the negotiated offset: "
          f"{descriptor.clock_offset_micros} us; feed this session to "
          "sync_session() to land on the unified timeline")


if __name__ == "__main__":
    asyncio.run(main())
