int main(void) {
    int a = nondet_int();
    int b = a * 2;
    if (b > 10) {
        b = 10;
    }
    return b;
}
