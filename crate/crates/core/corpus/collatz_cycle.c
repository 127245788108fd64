int main(void) {
    int n = nondet_int();
    __VERIFIER_assume(n >= 1 && n <= 4);
    while (n != 0) {
        if (n % 2 == 0) {
            n = n / 2;
        } else {
            n = 3 * n + 1;
        }
    }
    return n;
}
