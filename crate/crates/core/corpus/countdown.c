int main(void) {
    unsigned char k = nondet_uchar();
    __VERIFIER_assume(k < 50);
    while (k > 0) {
        k = k - 1;
    }
    return 0;
}
