# six-action finite system; b holds at s1 and s2
state s0 :
state s1 : b
state s2 : b
state s3 :
state s4 :
trans s0 u1 s3
trans s0 u1 s4
trans s0 u2 s0
trans s4 u4 s3
trans s4 u4 s2
trans s2 v2 s3
trans s2 v2 s2
trans s3 u3 s1
trans s1 v1 s1
