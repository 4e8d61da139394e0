#!/usr/bin/env python3
"""Writes the evaluation alert fixtures and, independently, the field values a
parser must recover from them. Re-run after editing the rows below."""
import json

YEAR = 2023
ROWS = [
    # message, gid, sid, rev, priority, proto, src, sport, dst, dport, classification
    ("MALWARE-CNC Harakit botnet traffic", 1, 45555, 2, 1, "TCP",
     "203.0.113.45", 51234, "192.168.1.20", 80, "A Network Trojan was detected"),
    ("SERVER-WEBAPP NetGear router default password login attempt admin/password", 1, 25007, 6, 1, "TCP",
     "198.51.100.7", 40112, "192.168.1.20", 443, "Attempted Administrator Privilege Gain"),
    ("SURICATA MQTT unassigned message type (0 or >15)", 1, 2229002, 1, 3, "TCP",
     "192.168.1.20", 1883, "203.0.113.99", 1883, "Generic Protocol Command Decode"),
    ("SURICATA HTTP Response abnormal chunked for transfer-encoding", 1, 2221045, 1, 3, "TCP",
     "203.0.113.8", 80, "192.168.1.20", 49800, "Generic Protocol Command Decode"),
    ("Mirai Botnet TR-069 Worm - Generic Architecture", 1, 2023548, 3, 1, "TCP",
     "198.51.100.23", 33012, "192.168.1.20", 7547, "A Network Trojan was detected"),
    ("Linux.IotReaper", 1, 2024930, 2, 1, "TCP",
     "2001:db8::bad:1", 38888, "fe80::17:88ff:fe6a:1f20", 8080, "A Network Trojan was detected"),
    ("Identifies IPs performing DNS lookups associated with common Tor proxies.", 1, 9000101, 1, 2, "UDP",
     "192.168.1.20", 53211, "192.168.1.1", 53, "Potential Corporate Privacy Violation"),
    ("Detects remote task creation via at.exe or API interacting with ATSVC namedpipe", 1, 9000102, 1, 2, "TCP",
     "192.168.1.55", 49700, "192.168.1.20", 445, "Attempted User Privilege Gain"),
]


def endpoint_fast(addr, port):
    return f"[{addr}]:{port}" if ":" in addr else f"{addr}:{port}"


def main():
    fast, eve, generic, expected = [], [], [], []
    for i, (msg, gid, sid, rev, prio, proto, src, sport, dst, dport, cls) in enumerate(ROWS):
        month, day, hour, minute, second, micros = 5, 4 + i, 10 + i, 15, 30 + i, 123456 + i
        ts_iso = f"{YEAR}-{month:02d}-{day:02d}T{hour:02d}:{minute:02d}:{second:02d}.{micros:06d}Z"
        fast.append(f"{month:02d}/{day:02d}-{hour:02d}:{minute:02d}:{second:02d}.{micros:06d}  [**] "
                    f"[{gid}:{sid}:{rev}] {msg} [**] [Classification: {cls}] [Priority: {prio}] "
                    f"{{{proto}}} {endpoint_fast(src, sport)} -> {endpoint_fast(dst, dport)}")
        eve.append(json.dumps({
            "timestamp": f"{YEAR}-{month:02d}-{day:02d}T{hour:02d}:{minute:02d}:{second:02d}.{micros:06d}+0000",
            "flow_id": 1000 + i, "in_iface": "br-lan", "event_type": "alert",
            "src_ip": src, "src_port": sport, "dest_ip": dst, "dest_port": dport, "proto": proto,
            "alert": {"action": "allowed", "gid": gid, "signature_id": sid, "rev": rev,
                      "signature": msg, "category": cls, "severity": prio}}))
        generic.append(json.dumps({
            "timestamp": ts_iso, "message": msg, "src_ip": src, "src_port": sport, "dest_ip": dst,
            "dest_port": dport, "proto": proto, "priority": prio, "sid": sid, "gid": gid, "rev": rev}))
        expected.append({"message": msg, "timestamp": ts_iso, "gid": gid, "sid": sid, "rev": rev,
                         "priority": prio, "protocol": proto, "src": src, "src_port": sport,
                         "dst": dst, "dst_port": dport})
    with open("eval_alerts.fast", "w") as f:
        f.write("\n".join(fast) + "\n")
    with open("eval_alerts.eve.jsonl", "w") as f:
        f.write("\n".join(eve) + "\n")
    with open("eval_alerts.generic.jsonl", "w") as f:
        f.write("\n".join(generic) + "\n")
    with open("eval_alerts_expected.json", "w") as f:
        json.dump({"year": YEAR, "alerts": expected}, f, indent=2)
        f.write("\n")
    for i, line in enumerate(fast):
        with open(f"row{i + 1}.fast", "w") as f:
            f.write(line + "\n")


if __name__ == "__main__":
    main()
